"""Pair-comparison study: sessions, randomized trials, response log.

A study is configured with image triples (original, uniformly attacked,
entropy-mask attacked). Each session presents every triple under all
three conditions — original vs itself, vs the first attack, vs the
second — in a fresh random order, with left/right placement flipped at
random per trial and the answer-button order flipped once per session.

Clients only ever see opaque image tokens, never conditions or file
names. Responses are appended to a JSONL file, one record per line, so
aggregate results can always be reconstructed by replaying the log.
"""

from __future__ import annotations

import json
import random
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateResponseError,
    StudyError,
    TrialIndexError,
    UnknownSessionError,
)
from .stats import run_hypothesis_battery, summarize

__all__ = [
    "ImageTriple",
    "StudyConfig",
    "TrialRecord",
    "Study",
    "load_study_config",
]

CHOICES = ("identical", "different")
CONDITION_SIDES = {
    "i": ("original", "original"),
    "ii": ("original", "bim"),
    "iii": ("original", "ebim"),
}


@dataclass(frozen=True)
class ImageTriple:
    """One stimulus: the original image and its two attacked versions."""

    pair_id: str
    original: str
    bim: str
    ebim: str

    def path(self, role: str) -> str:
        return {"original": self.original, "bim": self.bim, "ebim": self.ebim}[role]


@dataclass(frozen=True)
class StudyConfig:
    triples: tuple
    display_duration_ms: int = 5000

    def __post_init__(self):
        if not self.triples:
            raise ValueError("study needs at least one image triple")
        ids = [t.pair_id for t in self.triples]
        if len(set(ids)) != len(ids):
            raise ValueError("pair ids must be unique")
        if self.display_duration_ms <= 0:
            raise ValueError("display duration must be positive")

    @property
    def trial_count(self) -> int:
        return 3 * len(self.triples)


def load_study_config(path) -> StudyConfig:
    """Read a study config JSON: {"display_ms": ..., "pairs": [{id, original, bim, ebim}]}."""
    raw = json.loads(Path(path).read_text())
    base = Path(path).parent
    triples = tuple(
        ImageTriple(
            pair_id=str(p["id"]),
            original=str(base / p["original"]),
            bim=str(base / p["bim"]),
            ebim=str(base / p["ebim"]),
        )
        for p in raw["pairs"]
    )
    return StudyConfig(triples=triples, display_duration_ms=int(raw.get("display_ms", 5000)))


@dataclass(frozen=True)
class TrialRecord:
    """One logged response."""

    session_id: str
    trial_index: int
    pair_id: str
    condition: str
    left_role: str
    right_role: str
    choice: str
    latency_ms: float
    timestamp: float

    def to_json_line(self) -> str:
        return json.dumps({
            "session_id": self.session_id,
            "trial_index": self.trial_index,
            "pair_id": self.pair_id,
            "condition": self.condition,
            "left_role": self.left_role,
            "right_role": self.right_role,
            "choice": self.choice,
            "latency_ms": self.latency_ms,
            "timestamp": self.timestamp,
        }, sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        return cls(
            session_id=d["session_id"],
            trial_index=int(d["trial_index"]),
            pair_id=d["pair_id"],
            condition=d["condition"],
            left_role=d["left_role"],
            right_role=d["right_role"],
            choice=d["choice"],
            latency_ms=float(d["latency_ms"]),
            timestamp=float(d["timestamp"]),
        )


@dataclass
class _Trial:
    pair_id: str
    condition: str
    left_role: str
    right_role: str
    left_token: str
    right_token: str


@dataclass
class _Session:
    session_id: str
    button_order: tuple
    trials: list
    responded: int = 0


class Study:
    """In-memory session state over an append-only response log."""

    def __init__(self, config: StudyConfig, responses_path):
        self.config = config
        self.responses_path = Path(responses_path)
        self._sessions: dict[str, _Session] = {}
        self._tokens: dict[str, str] = {}  # image token -> file path
        self._lock = threading.Lock()

    # -- session lifecycle --------------------------------------------------

    def create_session(self, seed=None) -> dict:
        """Randomize trial order, per-trial sides and the button order.

        The permutation and coin flips are deterministic given ``seed``;
        image tokens are always fresh unpredictable values.
        """
        rng = random.Random(seed)
        plan = [
            (triple, condition)
            for triple in self.config.triples
            for condition in CONDITION_SIDES
        ]
        rng.shuffle(plan)

        trials = []
        with self._lock:
            for triple, condition in plan:
                left_role, right_role = CONDITION_SIDES[condition]
                if rng.random() < 0.5:
                    left_role, right_role = right_role, left_role
                left_token = secrets.token_urlsafe(16)
                right_token = secrets.token_urlsafe(16)
                self._tokens[left_token] = triple.path(left_role)
                self._tokens[right_token] = triple.path(right_role)
                trials.append(_Trial(
                    pair_id=triple.pair_id,
                    condition=condition,
                    left_role=left_role,
                    right_role=right_role,
                    left_token=left_token,
                    right_token=right_token,
                ))
            button_order = tuple(CHOICES) if rng.random() < 0.5 else tuple(reversed(CHOICES))
            session_id = secrets.token_urlsafe(16)
            self._sessions[session_id] = _Session(session_id, button_order, trials)
        return {
            "session_id": session_id,
            "trial_count": len(trials),
            "button_order": list(button_order),
        }

    def _session(self, session_id) -> _Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise UnknownSessionError(f"unknown session {session_id!r}") from None

    # -- trial delivery and responses ----------------------------------------

    def get_trial(self, session_id, index: int) -> dict:
        """Return the blinded pair payload for one trial.

        Trials that were already answered cannot be revisited (the index
        is monotone), and nothing in the payload identifies the condition.
        """
        with self._lock:
            session = self._session(session_id)
            if not 0 <= index < len(session.trials):
                raise TrialIndexError(
                    f"trial index {index} out of range [0, {len(session.trials)})"
                )
            if index < session.responded:
                raise TrialIndexError(f"trial {index} was already answered")
            trial = session.trials[index]
            return {
                "left_url": f"/img/{trial.left_token}",
                "right_url": f"/img/{trial.right_token}",
                "display_ms": self.config.display_duration_ms,
            }

    def resolve_token(self, token: str) -> str:
        with self._lock:
            try:
                return self._tokens[token]
            except KeyError:
                raise StudyError("unknown image token") from None

    def post_response(self, session_id, index: int, choice: str,
                      latency_ms: float) -> dict:
        """Append one response; trials must be answered once, in order."""
        if choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}, got {choice!r}")
        if latency_ms < 0:
            raise ValueError("latency must be nonnegative")
        with self._lock:
            session = self._session(session_id)
            if not 0 <= index < len(session.trials):
                raise TrialIndexError(
                    f"trial index {index} out of range [0, {len(session.trials)})"
                )
            if index < session.responded:
                raise DuplicateResponseError(
                    f"trial {index} already has a response"
                )
            if index > session.responded:
                raise TrialIndexError(
                    f"trial {index} posted out of order; expected {session.responded}"
                )
            trial = session.trials[index]
            record = TrialRecord(
                session_id=session_id,
                trial_index=index,
                pair_id=trial.pair_id,
                condition=trial.condition,
                left_role=trial.left_role,
                right_role=trial.right_role,
                choice=choice,
                latency_ms=float(latency_ms),
                timestamp=time.time(),
            )
            with open(self.responses_path, "a", encoding="utf-8") as fh:
                fh.write(record.to_json_line() + "\n")
            session.responded += 1
            return {"accepted": True, "count": session.responded}

    # -- aggregation ----------------------------------------------------------

    def load_records(self) -> list[TrialRecord]:
        if not self.responses_path.exists():
            return []
        records = []
        with open(self.responses_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(TrialRecord.from_json_line(line))
        return records

    def results(self) -> dict:
        """Aggregate report computed by replaying the response log."""
        return aggregate_results(self.load_records(), self.config.trial_count)


def aggregate_results(records, trial_count: int) -> dict:
    """Per-session condition means, plus the hypothesis battery when at
    least two sessions are complete."""
    summaries = summarize(records)
    sessions = []
    complete = 0
    for s in summaries:
        total = sum(s.counts.values())
        is_complete = total == trial_count and s.complete
        complete += is_complete
        sessions.append({
            "session_id": s.participant,
            "mu_none": s.mu_none,
            "mu_bim": s.mu_bim,
            "mu_ebim": s.mu_ebim,
            "responses": total,
            "complete": is_complete,
        })
    report = {
        "sessions": sessions,
        "complete_sessions": complete,
        "trial_count": trial_count,
    }
    if complete >= 2:
        battery = run_hypothesis_battery(
            [s for s, row in zip(summaries, sessions) if row["complete"]]
        )
        report["battery"] = battery.to_rows()
        report["alpha"] = battery.alpha
    else:
        report["battery"] = None
        report["note"] = (
            f"hypothesis battery needs >= 2 complete sessions, have {complete}"
        )
    return report
