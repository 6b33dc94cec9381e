"""Order and time-budget rules over event-chain models.

Rule strings follow the validator grammar:

    order:<term> before <term>
    order:<term> after <term>
    time:<term> <= <integer milliseconds>

Terms name events by label fragments ("camera", "receiving"); resolution
lowercases and crudely stems both sides, and must land on exactly one node —
ambiguity is reported instead of guessed away. "before" means strict one-way
reachability in the DAG, so mutually unreachable (parallel) nodes fail both
directions and surface an under-constrained chain.

A time rule checks the resolved node's own budget annotation; a node without
one yields status=error (the chain is under-annotated), not a failure.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from chaingen.errors import ChainGenError
from chaingen.event_chain import EventChain, descendants
from chaingen.llm_gateway import LlmGateway
from chaingen.prompt_forge import RULE_SCRIPT_GEN, load_template, render
from chaingen.retrieval import tokenize

VALIDATOR_SCRIPT_NAME = "event_chain_validator.py"

_ORDER_RE = re.compile(r"order:\s*(?P<left>.+?)\s+(?P<rel>before|after)\s+(?P<right>.+?)\s*\Z")
_TIME_RE = re.compile(r"time:\s*(?P<term>.+?)\s*<=\s*(?P<limit>\d+)\s*\Z")
_SUFFIXES = ("ing", "ed", "es", "s")


class BadRuleSyntax(ChainGenError):
    """The rule string does not match the grammar."""


class NoMatch(ChainGenError):
    """A rule term matches no node label."""


class AmbiguousMatch(ChainGenError):
    """A rule term matches more than one node label."""


class ScriptShapeInvalid(ChainGenError):
    """A generated validation script does not follow the one-rule-per-call
    invocation contract."""


@dataclass(frozen=True)
class OrderRule:
    left_term: str
    relation: str  # "before" | "after"
    right_term: str


@dataclass(frozen=True)
class TimeBudgetRule:
    term: str
    limit_ms: int


Rule = OrderRule | TimeBudgetRule


@dataclass(frozen=True)
class RuleResult:
    rule: Rule
    status: str  # "pass" | "fail" | "error"
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    results: tuple[RuleResult, ...]
    overall: str

    @classmethod
    def from_results(cls, results) -> "ValidationReport":
        results = tuple(results)
        statuses = {r.status for r in results}
        if "error" in statuses:
            overall = "error"
        elif "fail" in statuses:
            overall = "fail"
        else:
            overall = "pass"
        return cls(results=results, overall=overall)


def parse_rule(text: str) -> Rule:
    """Parse one rule string; surrounding whitespace is tolerated."""
    stripped = text.strip()
    m = _ORDER_RE.fullmatch(stripped)
    if m:
        return OrderRule(left_term=m.group("left"), relation=m.group("rel"), right_term=m.group("right"))
    m = _TIME_RE.fullmatch(stripped)
    if m:
        return TimeBudgetRule(term=m.group("term"), limit_ms=int(m.group("limit")))
    raise BadRuleSyntax(f"unparseable rule: {text!r}")


def format_rule(rule: Rule) -> str:
    """Render a rule back to its grammar string."""
    if isinstance(rule, OrderRule):
        return f"order:{rule.left_term} {rule.relation} {rule.right_term}"
    return f"time:{rule.term} <= {rule.limit_ms}"


def _stem(token: str) -> str:
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 2:
            token = token[: -len(suffix)]
            break
    # Also drop a bare trailing "e" so inflections of the same verb meet at
    # one stem (receive / receiving -> receiv).
    if token.endswith("e") and len(token) >= 4:
        token = token[:-1]
    return token


def stem_tokens(text: str) -> frozenset[str]:
    """Lowercased, suffix-stripped token set used for term/label matching."""
    return frozenset(_stem(tok) for tok in tokenize(text))


def resolve_term(chain: EventChain, term: str) -> str:
    """Resolve a rule term to exactly one node id by stemmed token overlap."""
    term_tokens = stem_tokens(term)
    if not term_tokens:
        raise NoMatch(f"term {term!r} has no tokens")
    matches = [n for n in chain.nodes if term_tokens & stem_tokens(n.label)]
    if not matches:
        raise NoMatch(f"term {term!r} matches no event label")
    if len(matches) > 1:
        labels = ", ".join(repr(n.label) for n in matches)
        raise AmbiguousMatch(f"term {term!r} matches several events: {labels}")
    return matches[0].id


def evaluate(chain: EventChain, rule: Rule) -> RuleResult:
    """Evaluate one rule; resolution problems become status=error."""
    try:
        if isinstance(rule, OrderRule):
            left = resolve_term(chain, rule.left_term)
            right = resolve_term(chain, rule.right_term)
            if rule.relation == "after":
                left, right = right, left
            # left must strictly precede right.
            forward = right in descendants(chain, left)
            backward = left in descendants(chain, right)
            if forward and not backward:
                return RuleResult(rule=rule, status="pass")
            detail = "events are mutually unreachable" if not forward and not backward else "order is reversed"
            return RuleResult(rule=rule, status="fail", detail=detail)

        node_id = resolve_term(chain, rule.term)
        budget = chain.node(node_id).params.time_budget_ms
        if budget is None:
            return RuleResult(rule=rule, status="error", detail="no time_budget on node")
        if budget <= rule.limit_ms:
            return RuleResult(rule=rule, status="pass", detail=f"{budget} <= {rule.limit_ms}")
        return RuleResult(rule=rule, status="fail", detail=f"{budget} > {rule.limit_ms}")
    except (NoMatch, AmbiguousMatch) as exc:
        return RuleResult(rule=rule, status="error", detail=str(exc))


def validate_all(chain: EventChain, rules) -> ValidationReport:
    """Evaluate every rule (no short-circuit) and aggregate the verdict."""
    return ValidationReport.from_results(evaluate(chain, rule) for rule in rules)


def check_script_shape(script: str) -> None:
    """Verify the one-rule-per-invocation contract of a validation script:
    every line calling the validator passes --json and exactly one --rule."""
    for lineno, line in enumerate(script.splitlines(), start=1):
        if VALIDATOR_SCRIPT_NAME not in line:
            continue
        if "--json" not in line:
            raise ScriptShapeInvalid(f"line {lineno} invokes the validator without --json")
        if line.count("--rule") != 1:
            raise ScriptShapeInvalid(
                f"line {lineno} must pass exactly one --rule, found {line.count('--rule')}"
            )


def generate_rule_script(constraints_text: str, gateway: LlmGateway, templates_dir=None) -> str:
    """Turn freeform constraint text into a validator shell script via the
    rule-script prompt, then shape-check the result."""
    template = load_template(RULE_SCRIPT_GEN, templates_dir)
    rendered = render(template, {"constraint rule": constraints_text})
    script = gateway.ask(rendered.text)
    check_script_shape(script)
    return script
