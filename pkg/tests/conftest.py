from __future__ import annotations

import datetime as dt
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from parlpol.corpus import Speech
from parlpol.resolution import Registry, RegistryEntry, ResolvedReference


HU_REGISTRY_ROWS = [
    # alias, class, canonical, party, from, to
    ("Prime Minister", "party_or_member", "peter-medgyessy", "MSZP", "2002-05-27", "2004-09-28"),
    ("Prime Minister", "party_or_member", "ferenc-gyurcsany", "MSZP", "2004-09-29", "2009-04-13"),
    ("Prime Minister", "party_or_member", "gordon-bajnai", "MSZP", "2009-04-14", "2010-05-28"),
    ("Prime Minister", "party_or_member", "viktor-orban", "Fidesz", "2010-05-29", "2022-12-31"),
    ("miniszterelnök", "party_or_member", "ferenc-gyurcsany", "MSZP", "2004-09-29", "2009-04-13"),
    ("miniszterelnök", "party_or_member", "viktor-orban", "Fidesz", "2010-05-29", "2022-12-31"),
    ("Viktor Orbán", "party_or_member", "viktor-orban", "Fidesz", "1998-01-01", "2030-12-31"),
    ("Ferenc Gyurcsány", "party_or_member", "ferenc-gyurcsany", "MSZP", "2000-01-01", "2030-12-31"),
    ("Fidesz", "party_or_member", "fidesz", "Fidesz", "1990-01-01", "2030-12-31"),
    ("MSZP", "party_or_member", "mszp", "MSZP", "1990-01-01", "2030-12-31"),
    ("Jobbik", "party_or_member", "jobbik", "Jobbik", "2003-01-01", "2030-12-31"),
    ("the Government", "government", "hu-government", "MSZP", "2002-05-27", "2010-05-28"),
    ("the Government", "government", "hu-government", "Fidesz", "2010-05-29", "2022-12-31"),
    ("European Commission", "foreign_institution", "european-commission", "", "1990-01-01", "2030-12-31"),
    ("Constitutional Court", "institution", "hu-constitutional-court", "", "1990-01-01", "2030-12-31"),
]


def make_hu_registry() -> Registry:
    entries = [
        RegistryEntry(
            alias=alias,
            country="HU",
            entity_class=cls,
            canonical_entity=canonical,
            party_id=party,
            valid_from=dt.date.fromisoformat(start),
            valid_to=dt.date.fromisoformat(end),
        )
        for alias, cls, canonical, party, start, end in HU_REGISTRY_ROWS
    ]
    return Registry(entries)


@pytest.fixture
def hu_registry() -> Registry:
    return make_hu_registry()


def make_speech(speech_id: str, text: str, country: str = "HU", date: str = "2011-05-01",
                party: str = "MSZP", speaker: str = "A. Speaker") -> Speech:
    return Speech(
        speech_id=speech_id,
        country=country,
        date=date,
        speaker_name=speaker,
        speaker_party=party,
        text=text,
        source="test",
    )


def make_ref(date: str, referring: str, referred: str, sentiment: int,
             mention_id: str = "", speech_id: str = "s", entity_class: str = "party_or_member",
             method: str = "registry-exact") -> ResolvedReference:
    return ResolvedReference(
        mention_id=mention_id or f"{speech_id}:{referring}:{referred}:{sentiment}",
        speech_id=speech_id,
        actor_surface=referred,
        context_description="",
        political_rationale="",
        sentiment=sentiment,
        date=date,
        entity_class=entity_class,
        canonical_entity=referred.lower(),
        referring_party=referring,
        referred_party=referred if entity_class in ("party_or_member", "government") else "",
        resolution_method=method,
        self_reference=referring == referred,
    )
