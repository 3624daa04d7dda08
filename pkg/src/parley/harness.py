"""Scripted scenario evaluation: the bounded feedback loop and its reports.

A scenario submits an opening utterance, judges the reply with a
declarative oracle, and, while the oracle fails, replays designer-authored
feedback paragraphs up to the session's attempt limit. Outcomes classify as

* success: the oracle passed with no feedback,
* conditional success: it passed after 1..limit feedback attempts,
* failure: it never passed within the limit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .adapters.base import ResponseEnvelope
from .adapters.mock import MockChat, MockScript, MockStt, MockTts, MockVision
from .adapters.base import BackendSet
from .errors import SuiteError, TurnAbortedError
from .metrics import LatencyRecorder
from .model import CameraRole, ConversationHistory, SessionConfig, Turn
from .pipeline import PipelineDriver


class Phase(str, Enum):
    PRECHECK = "precheck"
    IDENTIFICATION = "identification"
    GUIDANCE = "guidance"
    RECOMMENDATIONS = "recommendations"
    EMOTIONAL = "emotional"
    VERIFICATION = "verification"


PHASE_LABELS = {
    Phase.PRECHECK: "1.1. Pre-check",
    Phase.IDENTIFICATION: "1.2. Identification",
    Phase.GUIDANCE: "2. Instructional Guidance",
    Phase.RECOMMENDATIONS: "3. Recommendations/Solutions",
    Phase.EMOTIONAL: "4. Emotional support",
    Phase.VERIFICATION: "5. Assembly verification",
}


class Classification(str, Enum):
    SUCCESS = "success"
    CONDITIONAL_SUCCESS = "conditional_success"
    FAILURE = "failure"


@dataclass(frozen=True)
class Oracle:
    """Declarative correctness predicate over a ResponseEnvelope.

    All configured conditions must hold; ``contains_any`` is satisfied by
    any one of its substrings. Substring matching is case-insensitive.
    """

    contains_all: tuple[str, ...] = ()
    contains_any: tuple[str, ...] = ()
    regex: str | None = None
    objects_present: tuple[str, ...] = ()
    objects_absent: tuple[str, ...] = ()
    emotion: str | None = None

    def passes(self, envelope: ResponseEnvelope) -> bool:
        text = envelope.reply_text.lower()
        if any(needle.lower() not in text for needle in self.contains_all):
            return False
        if self.contains_any and not any(n.lower() in text for n in self.contains_any):
            return False
        if self.regex and not re.search(self.regex, envelope.reply_text, re.IGNORECASE):
            return False
        state = {o.name.lower(): o.present for o in envelope.objects}
        if any(state.get(name.lower()) is not True for name in self.objects_present):
            return False
        if any(state.get(name.lower()) is not False for name in self.objects_absent):
            return False
        if self.emotion is not None:
            if envelope.emotion is None or envelope.emotion.name != self.emotion.lower():
                return False
        return True

    @classmethod
    def from_dict(cls, data: dict) -> "Oracle":
        return cls(
            contains_all=tuple(data.get("contains_all", [])),
            contains_any=tuple(data.get("contains_any", [])),
            regex=data.get("regex"),
            objects_present=tuple(data.get("objects_present", [])),
            objects_absent=tuple(data.get("objects_absent", [])),
            emotion=data.get("emotion"),
        )


@dataclass(frozen=True)
class Scenario:
    id: str
    phase: Phase
    initial_user_text: str
    oracle: Oracle
    feedback_paragraphs: tuple[str, ...] = ()
    fixtures: dict = field(default_factory=dict)
    source: str = "authored"

    @classmethod
    def from_dict(cls, data: dict, index: int) -> "Scenario":
        for name in ("id", "phase", "initial_user_text", "oracle"):
            if name not in data:
                raise SuiteError(f"scenario #{index}: missing field {name!r}")
        try:
            phase = Phase(data["phase"])
        except ValueError:
            raise SuiteError(
                f"scenario #{index} ({data['id']}): unknown phase {data['phase']!r}"
            ) from None
        return cls(
            id=str(data["id"]),
            phase=phase,
            initial_user_text=data["initial_user_text"],
            oracle=Oracle.from_dict(data["oracle"]),
            feedback_paragraphs=tuple(data.get("feedback_paragraphs", [])),
            fixtures=dict(data.get("fixtures", {})),
            source=data.get("source", "authored"),
        )


@dataclass(frozen=True)
class ScenarioOutcome:
    scenario_id: str
    classification: Classification
    feedback_attempts_used: int
    transcript: tuple[Turn, ...]
    note: str = ""


@dataclass
class PhaseStats:
    scenario_count: int = 0
    success: int = 0
    conditional: int = 0
    failure: int = 0

    def add(self, classification: Classification) -> None:
        self.scenario_count += 1
        if classification is Classification.SUCCESS:
            self.success += 1
        elif classification is Classification.CONDITIONAL_SUCCESS:
            self.conditional += 1
        else:
            self.failure += 1


@dataclass
class PhaseReport:
    phases: dict[Phase, PhaseStats] = field(default_factory=dict)
    outcomes: list[ScenarioOutcome] = field(default_factory=list)
    scenario_phase: dict[str, Phase] = field(default_factory=dict)

    def add(self, scenario: Scenario, outcome: ScenarioOutcome) -> None:
        self.phases.setdefault(scenario.phase, PhaseStats()).add(outcome.classification)
        self.outcomes.append(outcome)
        self.scenario_phase[scenario.id] = scenario.phase

    def attempts(self, scenario_id: str) -> int:
        for outcome in self.outcomes:
            if outcome.scenario_id == scenario_id:
                return outcome.feedback_attempts_used
        raise KeyError(scenario_id)

    def classification(self, scenario_id: str) -> Classification:
        for outcome in self.outcomes:
            if outcome.scenario_id == scenario_id:
                return outcome.classification
        raise KeyError(scenario_id)

    @property
    def any_failure(self) -> bool:
        return any(o.classification is Classification.FAILURE for o in self.outcomes)

    def to_text(self) -> str:
        header = (
            f"{'Phase':<32}{'Scenarios':>10}{'Success':>9}{'Conditional':>13}{'Failure':>9}"
        )
        lines = [header, "-" * len(header)]
        totals = PhaseStats()
        for phase in Phase:
            stats = self.phases.get(phase)
            if stats is None:
                continue
            lines.append(
                f"{PHASE_LABELS[phase]:<32}{stats.scenario_count:>10}"
                f"{stats.success:>9}{stats.conditional:>13}{stats.failure:>9}"
            )
            totals.scenario_count += stats.scenario_count
            totals.success += stats.success
            totals.conditional += stats.conditional
            totals.failure += stats.failure
        lines.append("-" * len(header))
        lines.append(
            f"{'Total':<32}{totals.scenario_count:>10}"
            f"{totals.success:>9}{totals.conditional:>13}{totals.failure:>9}"
        )
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["phase,scenario_count,success,conditional_success,failure"]
        for phase in Phase:
            stats = self.phases.get(phase)
            if stats is None:
                continue
            lines.append(
                f"{phase.value},{stats.scenario_count},{stats.success},"
                f"{stats.conditional},{stats.failure}"
            )
        return "\n".join(lines) + "\n"

    def attempts_csv(self) -> str:
        lines = ["scenario_id,phase,classification,feedback_attempts"]
        for outcome in self.outcomes:
            phase = self.scenario_phase[outcome.scenario_id]
            lines.append(
                f"{outcome.scenario_id},{phase.value},"
                f"{outcome.classification.value},{outcome.feedback_attempts_used}"
            )
        return "\n".join(lines) + "\n"


def run_scenario(
    scenario: Scenario, driver: PipelineDriver, limit: int | None = None
) -> ScenarioOutcome:
    """Drive one scenario through a session and classify the outcome."""
    attempt_limit = limit if limit is not None else driver.config.feedback_attempt_limit
    attempts = 0
    note = ""

    def submit(text: str) -> ResponseEnvelope | None:
        record = driver.run_turn(text=text)
        return record.envelope if record else None

    try:
        envelope = submit(scenario.initial_user_text)
        passed = envelope is not None and scenario.oracle.passes(envelope)
        while not passed and attempts < attempt_limit:
            if not scenario.feedback_paragraphs:
                break
            paragraph = scenario.feedback_paragraphs[
                attempts % len(scenario.feedback_paragraphs)
            ]
            attempts += 1
            envelope = submit(paragraph)
            passed = envelope is not None and scenario.oracle.passes(envelope)
    except TurnAbortedError as exc:
        return ScenarioOutcome(
            scenario_id=scenario.id,
            classification=Classification.FAILURE,
            feedback_attempts_used=attempts,
            transcript=tuple(driver.history.turns),
            note=f"aborted: {exc}",
        )

    if passed and attempts == 0:
        classification = Classification.SUCCESS
    elif passed:
        classification = Classification.CONDITIONAL_SUCCESS
    else:
        classification = Classification.FAILURE
    return ScenarioOutcome(
        scenario_id=scenario.id,
        classification=classification,
        feedback_attempts_used=attempts,
        transcript=tuple(driver.history.turns),
        note=note,
    )


# ---------------------------------------------------------------------------
# Suite files


def load_scenarios(path: str | Path) -> list[Scenario]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SuiteError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SuiteError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    scenarios_raw = data.get("scenarios", [])
    if not scenarios_raw:
        raise SuiteError(f"{path}: suite declares no scenarios")
    scenarios = [Scenario.from_dict(item, i) for i, item in enumerate(scenarios_raw)]
    seen: set[str] = set()
    for scenario in scenarios:
        if scenario.id in seen:
            raise SuiteError(f"duplicate scenario id {scenario.id!r}")
        seen.add(scenario.id)
    return scenarios


def load_reply_scripts(path: str | Path) -> dict[str, list[dict]]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SuiteError(f"reply script file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SuiteError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    scripts = data.get("scripts")
    if not isinstance(scripts, dict):
        raise SuiteError(f"{path}: missing 'scripts' mapping")
    return scripts


def build_scenario_driver(
    scenario: Scenario,
    entries: list[dict],
    config: SessionConfig | None = None,
    recorder: LatencyRecorder | None = None,
) -> PipelineDriver:
    """Session wired with the scenario's camera fixtures and reply script."""
    config = config or SessionConfig()
    fixtures = {
        CameraRole.TASK_VIEW: scenario.fixtures.get("task_view", "parts_all_present"),
        CameraRole.USER_VIEW: scenario.fixtures.get("user_view", "user_neutral"),
    }
    script = MockScript.from_dict({"mode": "sequential", "entries": entries})
    backends = BackendSet(
        stt=MockStt(default_text=""),
        vision=MockVision(fixtures=fixtures),
        llm=MockChat(script),
        tts=MockTts(),
    )
    history = ConversationHistory(config.system_prompt, config.history_budget)
    return PipelineDriver(
        config=config,
        backends=backends,
        history=history,
        session_id=f"scenario-{scenario.id}",
        recorder=recorder,
    )


def run_suite(
    scenario_path: str | Path,
    script_path: str | Path,
    config: SessionConfig | None = None,
    out_dir: str | Path | None = None,
    recorder: LatencyRecorder | None = None,
) -> PhaseReport:
    """Run every scenario in declared order and aggregate the phase report.

    Scenarios run sequentially on independent sessions, so reports are
    stable and byte-identical for identical inputs.
    """
    scenarios = load_scenarios(scenario_path)
    scripts = load_reply_scripts(script_path)
    recorder = recorder or LatencyRecorder()
    report = PhaseReport()
    limit = (config or SessionConfig()).feedback_attempt_limit

    for scenario in scenarios:
        if len(scenario.feedback_paragraphs) > limit:
            raise SuiteError(
                f"scenario {scenario.id!r} declares more feedback paragraphs "
                f"than the attempt limit {limit}"
            )
        entries = scripts.get(scenario.id)
        if entries is None:
            raise SuiteError(f"no reply script for scenario {scenario.id!r}")
        driver = build_scenario_driver(scenario, entries, config, recorder)
        outcome = run_scenario(scenario, driver)
        report.add(scenario, outcome)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.to_text(), encoding="utf-8")
        (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
        (out / "attempts.csv").write_text(report.attempts_csv(), encoding="utf-8")
        (out / "latencies.csv").write_text(recorder.rows_csv(), encoding="utf-8")
    return report
