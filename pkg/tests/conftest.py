import pytest

from crisistl.corpus import Corpus, Event, LabelClass, Message
from crisistl.synthetic import SyntheticConfig, make_corpus, make_resources
from crisistl.unify import taxonomy_record


@pytest.fixture(scope="session")
def synth_corpus():
    return make_corpus(SyntheticConfig(seed=0))


@pytest.fixture(scope="session")
def synth_resources(synth_corpus):
    return make_resources(synth_corpus, seed=0)


def msg(mid, text="hello there", language="en", event_id="ev1", label=LabelClass.RELATED, source="Src", **kw):
    return Message(mid, text, language, event_id, label, source, **kw)


def tiny_corpus(messages, hazards=None):
    """Corpus whose events are inferred from the messages; ``hazards`` maps event -> hazard type."""
    hazards = hazards or {}
    events = {}
    for m in messages:
        if m.event_id not in events:
            events[m.event_id] = taxonomy_record(m.event_id, hazards.get(m.event_id, "earthquake"), year=2015)
    return Corpus(tuple(messages), events, tuple(sorted({m.source_dataset for m in messages})))
