"""Open-ended to multiple-choice conversion with balanced answer letters."""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import DistractorCollision
from .items import DIRECTION_TYPES, LETTERS, NUMERIC_TYPES, QAItem, format_answer
from .templates import DIRECTION_LABELS, TURNS, choice_params, render

DISTRACTOR_FACTORS = ((0.40, 0.70), (1.35, 1.75), (2.0, 3.0))
MAX_RETRIES = 100


class LetterBalancer:
    """Hands out the least-used letter so far; ties broken by its own rng."""

    def __init__(self, seed: int = 0):
        self.counts = dict.fromkeys(LETTERS, 0)
        self.rng = np.random.default_rng([seed, 0x1e77e5])

    def next(self) -> str:
        low = min(self.counts.values())
        options = [k for k in LETTERS if self.counts[k] == low]
        pick = options[int(self.rng.integers(len(options)))]
        self.counts[pick] += 1
        return pick


def _numeric_distractors(item: QAItem, rng) -> list[str]:
    value = float(item.provenance.value)
    for _ in range(MAX_RETRIES):
        out = []
        for lo, hi in DISTRACTOR_FACTORS:
            v = value * rng.uniform(lo, hi)
            out.append(str(int(round(v))) if item.qtype == "obj_count" else format_answer(item.qtype, v))
        if len({item.answer, *out}) == 4:
            return out
    raise DistractorCollision(f"{item.id}: no distinct distractors for {item.answer!r}")


def _permutation_distractors(item: QAItem, rng) -> list[str]:
    cats = item.answer.split(", ")
    perms = [", ".join(p) for p in itertools.permutations(cats)]
    perms.remove(item.answer)
    return [perms[i] for i in rng.choice(len(perms), size=3, replace=False)]


def _direction_distractors(item: QAItem, rng) -> list[str]:
    labels = DIRECTION_LABELS[DIRECTION_TYPES[item.qtype]]
    others = [x for x in labels if x != item.answer]
    pad = [x for x in DIRECTION_LABELS["hard"] if x not in labels]
    need = 3 - len(others)
    if need > 0:
        others += [pad[i] for i in sorted(rng.choice(len(pad), size=need, replace=False))]
    return others


def _route_distractors(item: QAItem, rng) -> list[str]:
    n = len(item.answer.split(", "))
    fills = [", ".join(f) for f in itertools.product(TURNS, repeat=n)]
    fills.remove(item.answer)
    if len(fills) < 3:
        raise DistractorCollision(f"{item.id}: route with {n} blank(s) has too few alternatives")
    return [fills[i] for i in rng.choice(len(fills), size=3, replace=False)]


def _category_distractors(item: QAItem, rng) -> list[str]:
    return [c for c in item.provenance.params["choices"] if c != item.answer]


def make_multiple_choice(item: QAItem, rng, balancer: LetterBalancer) -> QAItem:
    if item.format != "open_ended":
        raise ValueError(f"{item.id} is already multiple choice")
    if item.qtype in NUMERIC_TYPES:
        others = _numeric_distractors(item, rng)
    elif item.qtype == "appearance_order":
        others = _permutation_distractors(item, rng)
    elif item.qtype in DIRECTION_TYPES:
        others = _direction_distractors(item, rng)
    elif item.qtype == "route_plan":
        others = _route_distractors(item, rng)
    else:
        others = _category_distractors(item, rng)

    letter = balancer.next()
    slot = LETTERS.index(letter)
    others = [others[i] for i in rng.permutation(len(others))]
    choices = others[:slot] + [item.answer] + others[slot:]

    question, prov = item.question, item.provenance
    if item.qtype in ("rel_dist", "spatiotemporal_dist"):
        # the question lists the same four categories, so keep both orders aligned
        params = {**prov.params, "choices": choices}
        extra = {"category": params["category"]} if item.qtype == "rel_dist" else {}
        question = render(item.qtype, **extra, **choice_params(choices))
        prov = type(prov)(prov.scene_id, prov.trajectory_id, prov.object_ids, prov.value, params, prov.metrics)
    mc_id = item.id.rsplit(":", 1)[0] + ":mc"
    return QAItem(mc_id, item.qtype, "multiple_choice", question, item.answer, prov,
                  tuple(choices), letter)


def finalize_pool(open_ended: list[QAItem], seed: int = 0):
    """Serial pass pairing each open-ended item with its multiple-choice twin.

    Returns (items, rejections). Items whose distractors collide keep only
    their open-ended form.
    """
    from .generators import stable_seed

    balancer = LetterBalancer(seed)
    out, rejected = [], []
    for it in open_ended:
        out.append(it)
        rng = np.random.default_rng(stable_seed(seed, it.id))
        try:
            out.append(make_multiple_choice(it, rng, balancer))
        except DistractorCollision:
            rejected.append({"trajectory_id": it.provenance.trajectory_id, "qtype": it.qtype,
                             "reason": "DISTRACTOR_COLLISION", "params": it.provenance.params})
    return out, rejected
