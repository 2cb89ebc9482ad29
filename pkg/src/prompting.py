"""Prompt construction from the task description, and the grammar of replies.

Example lines follow one canonical grammar so that they can be parsed back:

    - BS user number: 7, chosen power: level 2, reward: 1.53, data-rate constraint: met
    - average user distance: 12.3 m, chosen power: level 4, reward: -0.50, data-rate constraint: violated
"""
import re
from dataclasses import dataclass, replace
from pathlib import Path

from src.config.prompts import (
    BAD_EXAMPLES_LABEL,
    CLARIFICATION,
    CONTINUOUS_TEMPLATE,
    DISCRETE_TEMPLATE,
    GOOD_EXAMPLES_LABEL,
)
from src.errors import ParseError, TemplateError
from src.experience import Example, ExampleSet, State
from src.netsim import Case

NUM_LEVELS = 4
EXAMPLES_PLACEHOLDER = "{examples}"
STATE_PLACEHOLDER = "{state}"

STATE_LABELS = {Case.DISCRETE: "BS user number", Case.CONTINUOUS: "average user distance"}

_EXAMPLE_LINE = re.compile(
    r"^- (?P<label>BS user number|average user distance): (?P<state>-?\d+(?:\.\d+)?)(?: m)?, "
    r"chosen power: level (?P<level>\d+), reward: (?P<reward>-?\d+\.\d+), "
    r"data-rate constraint: (?P<status>met|violated)$"
)
_LEVEL = re.compile(r"\blevel\s*(\d+)", re.IGNORECASE)


@dataclass(frozen=True)
class PromptTemplate:
    """Task description with one `{examples}` and one `{state}` placeholder."""

    text: str
    case: Case = Case.DISCRETE

    def __post_init__(self) -> None:
        for placeholder in (EXAMPLES_PLACEHOLDER, STATE_PLACEHOLDER):
            count = self.text.count(placeholder)
            if count != 1:
                raise TemplateError(f"Template must contain {placeholder} exactly once, found {count}")

    @classmethod
    def default(cls, case: Case = Case.DISCRETE) -> "PromptTemplate":
        text = DISCRETE_TEMPLATE if case == Case.DISCRETE else CONTINUOUS_TEMPLATE
        return cls(text=text, case=case)

    @classmethod
    def from_file(cls, path: str | Path, case: Case = Case.DISCRETE) -> "PromptTemplate":
        return cls(text=Path(path).read_text(encoding="utf-8"), case=case)

    def _section(self, prefix: str) -> str:
        return next((line for line in self.text.splitlines() if line.startswith(prefix)), "")

    @property
    def goal(self) -> str:
        return self._section("Task goal:")

    @property
    def definition(self) -> str:
        return self._section("Task definition:")

    @property
    def rules(self) -> str:
        return self._section("Rules:")

    def render(self, examples: str, state: str) -> str:
        return self.text.replace(EXAMPLES_PLACEHOLDER, examples).replace(STATE_PLACEHOLDER, state)


@dataclass(frozen=True)
class PromptBundle:
    text: str
    example_count: int
    state: str  # query state as rendered
    bs: int
    case: Case = Case.DISCRETE

    def with_clarification(self) -> "PromptBundle":
        return replace(self, text=f"{self.text}\n{CLARIFICATION}")


@dataclass(frozen=True)
class ParsedAction:
    level: int
    raw: str


@dataclass(frozen=True)
class RenderedExample:
    """An example line as read back from a prompt."""

    state: float
    level: int
    reward: float
    constraint_ok: bool


def render_state(value: State, case: Case) -> str:
    match case:
        case Case.DISCRETE:
            return str(int(value))  # type: ignore[arg-type]
        case Case.CONTINUOUS:
            return f"{value:.1f}"
        case _:
            raise TemplateError(f"Unknown case: {case}")


def render_example(example: Example, case: Case) -> str:
    state = render_state(example.state, case)
    if case == Case.CONTINUOUS:
        state += " m"
    status = "met" if example.constraint_ok else "violated"
    return (
        f"- {STATE_LABELS[case]}: {state}, chosen power: level {example.action}, "
        f"reward: {example.reward:.2f}, data-rate constraint: {status}"
    )


def parse_example_line(line: str) -> RenderedExample:
    match = _EXAMPLE_LINE.match(line.strip())
    if match is None:
        raise ParseError(f"Not an example line: {line!r}")
    return RenderedExample(
        state=float(match["state"]),
        level=int(match["level"]),
        reward=float(match["reward"]),
        constraint_ok=match["status"] == "met",
    )


def build_prompt(tpl: PromptTemplate, examples: ExampleSet, state: str, bs: int) -> PromptBundle:
    """Fill the task description with the chosen examples and the query state.

    Args:
        tpl: Task description template
        examples: Recommended and inadvisable examples
        state: Query state, already rendered
        bs: BS the prompt decides for

    Returns:
        The prompt and the bookkeeping that goes with it
    """
    lines = []
    if examples.recommended:
        lines.append(GOOD_EXAMPLES_LABEL)
        lines.extend(render_example(ex, tpl.case) for ex in examples.recommended)
    if examples.inadvisable:
        lines.append(BAD_EXAMPLES_LABEL)
        lines.extend(render_example(ex, tpl.case) for ex in examples.inadvisable)
    return PromptBundle(
        text=tpl.render("\n".join(lines), state),
        example_count=len(examples),
        state=state,
        bs=bs,
        case=tpl.case,
    )


def build_feedback_prompt(
    tpl: PromptTemplate, last: Example | None, state: str, bs: int
) -> PromptBundle:
    """Prompt carrying only the previous decision's outcome as feedback."""
    if last is None:
        examples = ExampleSet()
    elif last.constraint_ok:
        examples = ExampleSet(recommended=(last,))
    else:
        examples = ExampleSet(inadvisable=(last,))
    return build_prompt(tpl, examples, state, bs)


def parse_examples(text: str) -> tuple[list[RenderedExample], list[RenderedExample]]:
    """Good and bad example lines of a built prompt, whatever template surrounds them."""
    good: list[RenderedExample] = []
    bad: list[RenderedExample] = []
    section: list[RenderedExample] | None = None
    for line in text.splitlines():
        if line == GOOD_EXAMPLES_LABEL:
            section = good
        elif line == BAD_EXAMPLES_LABEL:
            section = bad
        elif section is not None and line.startswith("- "):
            section.append(parse_example_line(line))
        else:
            section = None
    return good, bad


def parse_action(reply: str) -> ParsedAction:
    """Take the last `level <n>` in the reply.

    Raises:
        ParseError: If no level is mentioned or the last one is outside 1..4
    """
    matches = _LEVEL.findall(reply)
    if not matches:
        raise ParseError(f"No power level in reply: {reply!r}")
    level = int(matches[-1])
    if not 1 <= level <= NUM_LEVELS:
        raise ParseError(f"Power level {level} outside 1..{NUM_LEVELS} in reply: {reply!r}")
    return ParsedAction(level=level, raw=reply)
