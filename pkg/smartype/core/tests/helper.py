import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from smartype.core.models.dataset_models import Category, Question, QuestionSet, Source, Split
from smartype.core.models.hierarchy_models import TypeHierarchy

TABLE_ONE = [
    {
        "id": "dbpedia_1",
        "question": "Who are the gymnasts coached by Amanda Reddin?",
        "category": "resource",
        "type": ["dbo:Gymnast", "dbo:Athlete", "dbo:Person", "dbo:Agent"],
    },
    {
        "id": "dbpedia_2",
        "question": "How many superpowers does wonder woman have?",
        "category": "literal",
        "type": ["number"],
    },
    {
        "id": "dbpedia_3",
        "question": "When did Margaret Mead marry Gregory Bateson?",
        "category": "literal",
        "type": ["date"],
    },
    {
        "id": "dbpedia_4",
        "question": "Is Azerbaijan a member of European Go Federation?",
        "category": "boolean",
        "type": ["boolean"],
    },
]

# child, parent; the castle chain makes the height 7
HIERARCHY_ROWS = [
    ("dbo:Agent", "ROOT"),
    ("dbo:Person", "dbo:Agent"),
    ("dbo:Athlete", "dbo:Person"),
    ("dbo:Gymnast", "dbo:Athlete"),
    ("dbo:Artist", "dbo:Person"),
    ("dbo:MusicalArtist", "dbo:Artist"),
    ("dbo:Work", "ROOT"),
    ("dbo:Film", "dbo:Work"),
    ("dbo:Place", "ROOT"),
    ("dbo:PopulatedPlace", "dbo:Place"),
    ("dbo:Settlement", "dbo:PopulatedPlace"),
    ("dbo:City", "dbo:Settlement"),
    ("dbo:ArchitecturalStructure", "dbo:Place"),
    ("dbo:Building", "dbo:ArchitecturalStructure"),
    ("dbo:HistoricBuilding", "dbo:Building"),
    ("dbo:Castle", "dbo:HistoricBuilding"),
    ("dbo:Fortress", "dbo:Castle"),
    ("dbo:Keep", "dbo:Fortress"),
]

NAMES = [
    "amanda reddin", "margaret mead", "gregory bateson", "john smith", "maria lopez",
    "peter brown", "anna schmidt", "li wei", "olga petrova", "james cook",
    "sara khan", "tom baker", "nina ricci", "omar farouk", "paul klee",
]
PLACES = [
    "bavaria", "ontario", "tuscany", "bretagne", "galicia",
    "kerala", "yukon", "saxony", "umbria", "wales",
]

RESOURCE_TEMPLATES = [
    ("Who are the gymnasts coached by {name}?", ["dbo:Gymnast", "dbo:Athlete", "dbo:Person", "dbo:Agent"]),
    ("Which cities are located in {place}?", ["dbo:City", "dbo:Settlement", "dbo:PopulatedPlace", "dbo:Place"]),
    ("Which films were directed by {name}?", ["dbo:Film", "dbo:Work"]),
    ("Which singers recorded albums with {name}?", ["dbo:MusicalArtist", "dbo:Artist", "dbo:Person", "dbo:Agent"]),
]
OTHER_TEMPLATES = [
    ("Is {name} a member of the {place} chess club?", "boolean", ["boolean"]),
    ("How many children does {name} have?", "literal", ["number"]),
    ("When did {name} move to {place}?", "literal", ["date"]),
    ("What is the nickname of {name}?", "literal", ["string"]),
]

ENTITY_ROWS = [
    ("dbr:Beth_Tweddle", "Beth Tweddle is a retired gymnast coached by Amanda Reddin", "dbo:Gymnast,dbo:Athlete,dbo:Person,dbo:Agent"),
    ("dbr:Nadia_Comaneci", "Nadia Comaneci is a gymnast and olympic champion", "dbo:Gymnast,dbo:Athlete,dbo:Person,dbo:Agent"),
    ("dbr:Usain_Bolt", "Usain Bolt is a sprinter and olympic athlete", "dbo:Athlete,dbo:Person,dbo:Agent"),
    ("dbr:Munich", "Munich is a city located in Bavaria", "dbo:City,dbo:Settlement,dbo:PopulatedPlace,dbo:Place"),
    ("dbr:Toronto", "Toronto is the largest city in Ontario", "dbo:City,dbo:Settlement,dbo:PopulatedPlace,dbo:Place"),
    ("dbr:Vertigo", "Vertigo is a film directed by Alfred Hitchcock", "dbo:Film,dbo:Work"),
    ("dbr:Adele", "Adele is a singer who recorded several albums", "dbo:MusicalArtist,dbo:Artist,dbo:Person,dbo:Agent"),
    ("dbr:Untyped", "An entity without any types about gymnasts", ""),
]


class BaseTestCase(SimpleTestCase):

    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.tmp_path = Path(self._tmp.name)

    def write_json(self, name: str, payload) -> Path:
        path = self.tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        return path

    def write_latin1(self, name: str, text: str) -> Path:
        """Write `text` in Latin-1, which is not valid UTF-8 once it holds an accented letter."""
        path = self.tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(text.encode("latin-1"))
        return path

    @staticmethod
    def table_one_questions() -> QuestionSet:
        return QuestionSet(
            source=Source.DBPEDIA,
            split=Split.TRAIN,
            questions=tuple(
                Question(id=row["id"], text=row["question"], category=Category(row["category"]), types=tuple(row["type"]))
                for row in TABLE_ONE
            ),
        )

    @staticmethod
    def toy_hierarchy() -> TypeHierarchy:
        return TypeHierarchy({child: None if parent == "ROOT" else parent for child, parent in HIERARCHY_ROWS})

    def write_hierarchy(self, name: str = "hierarchy.tsv") -> Path:
        return self.write_text(name, "".join(f"{child}\t{parent}\n" for child, parent in HIERARCHY_ROWS))

    def write_entities(self, name: str = "entities.tsv") -> Path:
        return self.write_text(name, "".join(f"{entity}\t{abstract}\t{types}\n" for entity, abstract, types in ENTITY_ROWS))

    @staticmethod
    def synthetic_records(per_template: int = 10, prefix: str = "q") -> list[dict]:
        """SMART-style records: every template filled with `per_template` names, interleaved."""
        records = []
        for index in range(per_template):
            name = NAMES[index % len(NAMES)]
            place = PLACES[index % len(PLACES)]
            for template, types in RESOURCE_TEMPLATES:
                records.append({"question": template.format(name=name, place=place), "category": "resource", "type": types})
            for template, category, types in OTHER_TEMPLATES:
                records.append({"question": template.format(name=name, place=place), "category": category, "type": types})
        for number, record in enumerate(records):
            record["id"] = f"{prefix}{number}"
        return records

    def synthetic_questions(self, per_template: int = 10, prefix: str = "q") -> QuestionSet:
        return QuestionSet(
            source=Source.DBPEDIA,
            split=Split.TRAIN,
            questions=tuple(
                Question(id=row["id"], text=row["question"], category=Category(row["category"]), types=tuple(row["type"]))
                for row in self.synthetic_records(per_template, prefix)
            ),
        )
