from .config_models import *  # noqa: F403
from .dataset_models import *  # noqa: F403
from .hierarchy_models import *  # noqa: F403
from .ranking_models import *  # noqa: F403
from .run_models import *  # noqa: F403
from .text_models import *  # noqa: F403
