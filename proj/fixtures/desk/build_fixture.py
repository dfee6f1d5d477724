#!/usr/bin/env python3
"""Regenerates the desk benchmark: SQLite files, tables.json, column docs and examples.

Run from anywhere; everything is written next to this script.
"""
import csv
import json
import sqlite3
from pathlib import Path

HERE = Path(__file__).resolve().parent

# Declaration order, column types and descriptions per database. Foreign keys
# are listed in the order they appear in the schema metadata.
SCHEMAS = {
    "toxicology": {
        "tables": [
            ("molecule", [
                ("molecule_id", "text", "unique id of molecule"),
                ("label", "text", "whether this molecule is carcinogenic or not"),
            ]),
            ("bond", [
                ("bond_id", "text", "unique id representing bonds"),
                ("molecule_id", "text", "identifying the molecule in which the bond appears"),
                ("bond_type", "text", "type of the bond"),
            ]),
            ("atom", [
                ("atom_id", "text", "the unique id of atoms"),
                ("molecule_id", "text", "identifying the molecule to which the atom belongs"),
                ("element", "text", "the element of the toxicology"),
            ]),
            ("connected", [
                ("atom_id", "text", "id of the first atom"),
                ("atom_id2", "text", "id of the second atom"),
                ("bond_id", "text", "bond id representing bond between two atoms"),
            ]),
        ],
        "foreign_keys": [
            ("atom.molecule_id", "molecule.molecule_id"),
            ("bond.molecule_id", "molecule.molecule_id"),
            ("connected.bond_id", "bond.bond_id"),
            ("connected.atom_id2", "atom.atom_id"),
            ("connected.atom_id", "atom.atom_id"),
        ],
    },
    "formula_1": {
        "tables": [
            ("drivers", [
                ("driverId", "integer", "the unique identification number identifying each driver"),
                ("driverRef", "text", "driver reference name"),
                ("number", "integer", "number"),
                ("code", "text", "abbreviated code for drivers"),
                ("forename", "text", "forename"),
                ("surname", "text", "surname"),
                ("dob", "date", "date of birth"),
                ("nationality", "text", "nationality of drivers"),
                ("url", "text", "the introduction website of the drivers"),
            ]),
            ("constructors", [
                ("constructorId", "integer", "the unique identification number identifying constructors"),
                ("constructorRef", "text", "Constructor Reference name"),
                ("name", "text", "full name of the constructor"),
                ("nationality", "text", "nationality of the constructor"),
            ]),
            ("races", [
                ("raceId", "integer", "the unique identification number identifying the race"),
                ("year", "integer", "year"),
                ("round", "integer", "round"),
                ("name", "text", "name of the race"),
                ("date", "date", "duration time"),
            ]),
            ("results", [
                ("resultId", "integer", "the unique identification number identifying race result"),
                ("raceId", "integer", "the identification number identifying the race"),
                ("driverId", "integer", "the identification number identifying the driver"),
                ("constructorId", "integer", "the identification number identifying which constructors"),
                ("grid", "integer", "the number identifying the area where cars are set into a grid formation"),
                ("position", "integer", "The finishing position or track of circuits"),
                ("points", "real", "points"),
            ]),
        ],
        "foreign_keys": [
            ("results.raceId", "races.raceId"),
            ("results.driverId", "drivers.driverId"),
            ("results.constructorId", "constructors.constructorId"),
        ],
    },
}

DEV = [
    (0, "toxicology", "How many molecules are carcinogenic?",
     "carcinogenic refers to label = '+';",
     "SELECT COUNT(molecule_id) FROM molecule WHERE label = '+'", "simple"),
    (1, "toxicology",
     "Among all chemical compounds identified in the database, what percent of compounds form a triple-bond.",
     "triple bond refers to bond_type = '#';",
     "SELECT CAST(COUNT(DISTINCT CASE WHEN bond_type = '#' THEN molecule_id ELSE NULL END) AS REAL) * 100 "
     "/ COUNT(DISTINCT molecule_id) FROM bond", "moderate"),
    (2, "toxicology", "What is the element of the atom TR000_1?", "",
     "SELECT element FROM atom WHERE atom_id = 'TR000_1'", "simple"),
    (3, "toxicology", "Which bond connects the atoms TR000_1 and TR000_2? Give the bond id.",
     "first atom refers to atom_id; second atom refers to atom_id2;",
     "SELECT bond_id FROM connected WHERE atom_id = 'TR000_1' AND atom_id2 = 'TR000_2'", "challenging"),
    (4, "toxicology", "What is the most common bond type?", "most common bond type refers to MAX(COUNT(bond_type));",
     "SELECT bond_type FROM bond GROUP BY bond_type ORDER BY COUNT(bond_id) DESC LIMIT 1", "moderate"),
    (5, "toxicology", "List the atom ids of the molecule TR000.", "",
     "SELECT atom_id FROM atom WHERE molecule_id = 'TR000'", "challenging"),
    (6, "toxicology", "How many atoms belong to the molecule TR001?", "",
     "SELECT COUNT(atom_id) FROM atom WHERE molecule_id = 'TR001'", "moderate"),
    (7, "formula_1", "How many Australian drivers who were born in 1980?",
     "Australian refers to nationality = 'Australian'; born in 1980 refers to year(dob) = 1980;",
     "SELECT COUNT(driverId) FROM drivers WHERE nationality = 'Australian' AND STRFTIME('%Y', dob) = '1980'",
     "simple"),
    (8, "formula_1", "List the forename and surname of every German driver.",
     "German refers to nationality = 'German';",
     "SELECT forename, surname FROM drivers WHERE nationality = 'German'", "moderate"),
    (9, "formula_1", "Which driver scored the most points in the 2009 season? Give the forename and surname.",
     "most points refers to MAX(SUM(points)); 2009 season refers to year = 2009;",
     "SELECT T1.forename, T1.surname FROM drivers AS T1 INNER JOIN results AS T2 ON T1.driverId = T2.driverId "
     "INNER JOIN races AS T3 ON T2.raceId = T3.raceId WHERE T3.year = 2009 GROUP BY T1.driverId "
     "ORDER BY SUM(T2.points) DESC LIMIT 1", "challenging"),
    (10, "formula_1", "Name the Italian constructors.", "Italian refers to nationality = 'Italian';",
     "SELECT name FROM constructors WHERE nationality = 'Italian'", "simple"),
    (11, "formula_1", "On what date was the Monaco Grand Prix held in 2009?",
     "Monaco Grand Prix refers to name = 'Monaco Grand Prix';",
     "SELECT date FROM races WHERE name = 'Monaco Grand Prix' AND year = 2009", "simple"),
]

TRAIN = [
    (100, "toxicology", "How many molecules are not carcinogenic?", "not carcinogenic refers to label = '-';",
     "SELECT COUNT(molecule_id) FROM molecule WHERE label = '-'", "simple"),
    (101, "toxicology", "What is the label of the molecule TR004?", "",
     "SELECT label FROM molecule WHERE molecule_id = 'TR004'", "simple"),
    (102, "toxicology", "How many double bonds are there in the molecule TR003?", "double bond refers to bond_type = '=';",
     "SELECT COUNT(bond_id) FROM bond WHERE molecule_id = 'TR003' AND bond_type = '='", "simple"),
    (103, "toxicology", "What percentage of atoms are carbon?", "carbon refers to element = 'c';",
     "SELECT CAST(COUNT(CASE WHEN element = 'c' THEN atom_id ELSE NULL END) AS REAL) * 100 / COUNT(atom_id) FROM atom",
     "moderate"),
    (104, "toxicology", "List the elements of the atoms in carcinogenic molecules.", "carcinogenic refers to label = '+';",
     "SELECT DISTINCT T1.element FROM atom AS T1 INNER JOIN molecule AS T2 ON T1.molecule_id = T2.molecule_id "
     "WHERE T2.label = '+'", "moderate"),
    (105, "toxicology", "Which atoms are connected by the bond TR001_1_2?", "",
     "SELECT atom_id, atom_id2 FROM connected WHERE bond_id = 'TR001_1_2'", "moderate"),
    (106, "toxicology", "How many molecules have at least one triple bond?", "triple bond refers to bond_type = '#';",
     "SELECT COUNT(DISTINCT molecule_id) FROM bond WHERE bond_type = '#'", "simple"),
    (107, "toxicology", "What is the type of the bond between atoms TR003_2 and TR003_3?", "",
     "SELECT T2.bond_type FROM connected AS T1 INNER JOIN bond AS T2 ON T1.bond_id = T2.bond_id "
     "WHERE T1.atom_id = 'TR003_2' AND T1.atom_id2 = 'TR003_3'", "challenging"),
    (108, "formula_1", "How many British drivers are there?", "British refers to nationality = 'British';",
     "SELECT COUNT(driverId) FROM drivers WHERE nationality = 'British'", "simple"),
    (109, "formula_1", "What is the code of the driver Sebastian Vettel?", "",
     "SELECT code FROM drivers WHERE forename = 'Sebastian' AND surname = 'Vettel'", "simple"),
    (110, "formula_1", "How many races were held in 2010?", "",
     "SELECT COUNT(raceId) FROM races WHERE year = 2010", "simple"),
    (111, "formula_1", "Which constructor did the winner of the 2010 Bahrain Grand Prix drive for?",
     "winner refers to position = 1;",
     "SELECT T3.name FROM races AS T1 INNER JOIN results AS T2 ON T1.raceId = T2.raceId INNER JOIN constructors AS T3 "
     "ON T2.constructorId = T3.constructorId WHERE T1.name = 'Bahrain Grand Prix' AND T1.year = 2010 AND T2.position = 1",
     "challenging"),
    (112, "formula_1", "List the surnames of drivers born before 1980.", "born before 1980 refers to year(dob) < 1980;",
     "SELECT surname FROM drivers WHERE STRFTIME('%Y', dob) < '1980'", "moderate"),
    (113, "formula_1", "What is the total number of points scored by Mark Webber?", "",
     "SELECT SUM(T2.points) FROM drivers AS T1 INNER JOIN results AS T2 ON T1.driverId = T2.driverId "
     "WHERE T1.forename = 'Mark' AND T1.surname = 'Webber'", "moderate"),
    (114, "formula_1", "Name the race held on 2009-06-07.", "",
     "SELECT name FROM races WHERE date = '2009-06-07'", "simple"),
    (115, "formula_1", "How many drivers started from pole position in 2009?",
     "pole position refers to grid = 1;",
     "SELECT COUNT(DISTINCT T2.driverId) FROM races AS T1 INNER JOIN results AS T2 ON T1.raceId = T2.raceId "
     "WHERE T1.year = 2009 AND T2.grid = 1", "moderate"),
]


def build_db(db_id):
    target = HERE / "database" / db_id / f"{db_id}.sqlite"
    target.parent.mkdir(parents=True, exist_ok=True)
    if target.exists():
        target.unlink()
    con = sqlite3.connect(target)
    con.executescript((HERE / "sql" / f"{db_id}.sql").read_text())
    con.commit()
    con.execute("VACUUM")
    con.close()


def write_descriptions(db_id, spec):
    out_dir = HERE / "database" / db_id / "database_description"
    out_dir.mkdir(parents=True, exist_ok=True)
    for table, columns in spec["tables"]:
        with open(out_dir / f"{table}.csv", "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["original_column_name", "column_name", "column_description", "data_format", "value_description"])
            for name, kind, desc in columns:
                w.writerow([name, "", desc, kind, ""])


def tables_entry(db_id, spec):
    table_names = [t for t, _ in spec["tables"]]
    columns = [[-1, "*"]]
    types = ["text"]
    index = {}
    for ti, (table, cols) in enumerate(spec["tables"]):
        for name, kind, _ in cols:
            index[f"{table}.{name}"] = len(columns)
            columns.append([ti, name])
            types.append(kind)
    return {
        "db_id": db_id,
        "table_names_original": table_names,
        "table_names": table_names,
        "column_names_original": columns,
        "column_names": columns,
        "column_types": types,
        "primary_keys": [],
        "foreign_keys": [[index[a], index[b]] for a, b in spec["foreign_keys"]],
    }


def examples(rows):
    return [{"question_id": qid, "db_id": db, "question": q, "evidence": ev, "SQL": sql, "difficulty": d}
            for qid, db, q, ev, sql, d in rows]


def dump(path, doc):
    path.write_text(json.dumps(doc, indent=2) + "\n")


def main():
    for db_id, spec in SCHEMAS.items():
        build_db(db_id)
        write_descriptions(db_id, spec)
    dump(HERE / "tables.json", [tables_entry(db, spec) for db, spec in SCHEMAS.items()])
    dump(HERE / "dev.json", examples(DEV))
    dump(HERE / "train.json", examples(TRAIN))


if __name__ == "__main__":
    main()
