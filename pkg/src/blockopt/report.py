"""Certificate results shared by the BCD, ADMM and KL checks."""

from dataclasses import asdict, dataclass, field

PASS = "pass"
FAIL = "fail"
VACUOUS = "vacuous"
INCONCLUSIVE = "inconclusive"

__all__ = ["PASS", "FAIL", "VACUOUS", "INCONCLUSIVE", "CheckReport", "violation_message"]


def violation_message(tag, k, lhs, rhs, slack, relation="<="):
    return f"[{tag}] k={k}: lhs={lhs:.17g} {relation} rhs={rhs:.17g} violated (slack {slack:.3g})"


@dataclass
class CheckReport:
    """Outcome of one certificate check over a trace.

    ``min_margin`` is the smallest ``rhs + slack - lhs`` seen (negative
    means violated). ``violations`` lists offending iteration indices.
    """

    name: str
    tag: str
    status: str
    min_margin: float = None
    violations: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status in (PASS, VACUOUS)

    def to_dict(self):
        return asdict(self)

    def __str__(self):
        extra = f" min_margin={self.min_margin:.3g}" if self.min_margin is not None else ""
        return f"{self.name} [{self.tag}]: {self.status}{extra}"
