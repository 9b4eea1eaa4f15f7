"""A small fixed grammar for desk-scale training runs: two entity types
(PER, LOC), two relation types (LivesIn, TravelsTo) plus NEG, vocabulary
under 200 words.

Most relation sentences cue the relation type through the verb; a fraction
use a season idiom where the type depends on the agreement of two modifier
words, which keeps the relation task from being linearly trivial.
"""

import numpy as np

from .corpus import EntitySpan, RelationAnnotation, sentence

FIRST_NAMES = [
    "anna", "boris", "carla", "dmitri", "elena", "felix", "greta", "henry",
    "ines", "jonas", "karin", "lars", "marta", "nikolai", "olga", "pavel",
    "rosa", "stefan", "tanja", "viktor",
]
LAST_NAMES = [
    "adler", "berg", "costa", "dietrich", "eriksen", "fischer", "gruber",
    "hansen", "ivanov", "jansen", "keller", "lang", "meier", "novak", "orlov",
]
PLACES = [
    "aachen", "bergen", "cadiz", "dresden", "essen", "florence", "geneva",
    "hamburg", "innsbruck", "jena", "krakow", "lyon", "malmo", "nantes",
    "oslo", "porto", "quimper", "riga", "seville", "turin",
]
PLACE_PREFIX = ["new", "old", "port", "east"]

LIVES_VERBS = [["lives", "in"], ["resides", "in"], ["settled", "in"]]
TRAVEL_VERBS = [["travels", "to"], ["flies", "to"], ["moved", "toward"]]
NEG_VERBS = [["met"], ["called"], ["greeted"]]
SEASON_DET = ["this", "last"]
SEASONS = ["spring", "autumn"]

PER, LOC = "PER", "LOC"
LIVES_IN, TRAVELS_TO = "LivesIn", "TravelsTo"

XOR_FRAC = 0.3


def _choice(rng, options):
    return options[rng.integers(len(options))]


def _person(rng):
    words = [_choice(rng, FIRST_NAMES)]
    if rng.random() < 0.5:
        words.append(_choice(rng, LAST_NAMES))
    return words


def _place(rng):
    if rng.random() < 0.3:
        return [_choice(rng, PLACE_PREFIX), _choice(rng, PLACES)]
    return [_choice(rng, PLACES)]


def _entity(words, etype, out_words):
    start = len(out_words)
    out_words.extend(words)
    return EntitySpan(start, len(out_words) - 1, etype)


def _relation_verb(rng):
    if rng.random() < 0.5:
        return list(_choice(rng, LIVES_VERBS)), LIVES_IN
    return list(_choice(rng, TRAVEL_VERBS)), TRAVELS_TO


def generate_sentence(rng, key):
    words, ents, rels = [], [], []
    kind = rng.random()
    if kind < XOR_FRAC:
        # season idiom: type depends on the modifier pair, not the verb
        p = _entity(_person(rng), PER, words)
        words.extend(["goes", "to"])
        loc = _entity([_choice(rng, PLACES)], LOC, words)
        det, season = _choice(rng, SEASON_DET), _choice(rng, SEASONS)
        words.extend([det, season])
        rtype = LIVES_IN if (det == "this") ^ (season == "autumn") else TRAVELS_TO
        ents += [p, loc]
        rels.append(RelationAnnotation(p, loc, rtype))
    elif kind < XOR_FRAC + 0.4:
        # single verb-cued relation: P verb L .
        p = _entity(_person(rng), PER, words)
        verb, rtype = _relation_verb(rng)
        words.extend(verb)
        loc = _entity(_place(rng), LOC, words)
        ents += [p, loc]
        rels.append(RelationAnnotation(p, loc, rtype))
    elif kind < XOR_FRAC + 0.55:
        # relation plus a distractor location
        p = _entity(_person(rng), PER, words)
        verb, rtype = _relation_verb(rng)
        words.extend(verb)
        loc = _entity(_place(rng), LOC, words)
        words.append("near")
        loc2 = _entity(_place(rng), LOC, words)
        ents += [p, loc, loc2]
        rels.append(RelationAnnotation(p, loc, rtype))
    elif kind < XOR_FRAC + 0.62:
        # lone entity
        loc = _entity(_place(rng), LOC, words)
        words.extend(["is", "quiet"])
        ents.append(loc)
    else:
        # two entities, no relation
        p = _entity(_person(rng), PER, words)
        words.extend(_choice(rng, NEG_VERBS))
        p2 = _entity(_person(rng), PER, words)
        ents += [p, p2]
    words.append(".")
    return sentence(words, ents, rels, key=key)


def generate_corpus(n_sentences=500, seed=7):
    rng = np.random.default_rng(seed)
    return [generate_sentence(rng, f"synth-{i}") for i in range(n_sentences)]


def synthetic_config(**overrides):
    """Desk-scale training configuration tuned for the fixed grammar.

    Dropout and weight decay are disabled here: at this scale they keep the
    relation head from fitting the season idiom within the epoch budget.
    """
    from .config import Config

    defaults = dict(
        encoder="toy",
        toy_emb_dim=32,
        hidden_size=48,
        entity_emb_dim=16,
        head_tail_dim=64,
        learning_rate=1e-2,
        batch_size=8,
        epochs=50,
        seed=13,
        dropout=0.0,
        weight_decay=0.0,
    )
    defaults.update(overrides)
    return Config(**defaults)
