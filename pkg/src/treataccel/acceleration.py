"""Treatment-acceleration rate factors.

A rate factor is the multiplicative change applied to the treatment
intensity in a hypothetical scenario: a constant, an indicator on a baseline
covariate, an indicator on a time-varying process, or a product of such
factors. Wherever an indicator is off the factor is 1 and the subject keeps
its observational treatment process. Evaluation only ever reads state
strictly before the query time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .cohort import SubjectPath

__all__ = ["AccelFactor", "AccelerationSpec", "parse_accel_spec", "evaluate_g"]


@dataclass(frozen=True)
class AccelFactor:
    form: str                   # "constant" | "baseline_indicator" | "process_indicator"
    b: float
    cov: str | None = None
    threshold: float | None = None
    direction: str = "gt"       # baseline: "gt" (cov > thr) or "le" (cov <= thr)
    process: str | None = None
    when: str = "nonzero"       # process: "nonzero" (N(t-) != 0) or "zero"

    def __post_init__(self):
        if self.b <= 0:
            raise ValueError("nonpositive rate factor b")
        if self.form == "baseline_indicator" and (self.cov is None or self.threshold is None):
            raise ValueError("baseline_indicator needs cov= and threshold=")
        if self.form == "process_indicator" and self.process is None:
            raise ValueError("process_indicator needs process=")
        if self.form not in ("constant", "baseline_indicator", "process_indicator"):
            raise ValueError(f"unknown acceleration form {self.form!r}")
        if self.direction not in ("gt", "le"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.when not in ("nonzero", "zero"):
            raise ValueError(f"unknown when= {self.when!r}")

    def evaluate(self, subject: SubjectPath, t: float) -> float:
        if self.form == "constant":
            return self.b
        if self.form == "baseline_indicator":
            x = subject.baseline.get(self.cov, 0.0)
            on = (x > self.threshold) if self.direction == "gt" else (x <= self.threshold)
            return 1.0 + (self.b - 1.0) * (1.0 if on else 0.0)
        # process indicator, read at t- for predictability
        state = subject.covariate_left(self.process, t)
        on = (state != 0.0) if self.when == "nonzero" else (state == 0.0)
        return 1.0 + (self.b - 1.0) * (1.0 if on else 0.0)

    def describe(self) -> str:
        if self.form == "constant":
            return f"constant b={self.b:g}"
        if self.form == "baseline_indicator":
            op = ">" if self.direction == "gt" else "<="
            return f"{self.cov}{op}{self.threshold:g} b={self.b:g}"
        op = "!=0" if self.when == "nonzero" else "==0"
        return f"{self.process}(t-){op} b={self.b:g}"


@dataclass(frozen=True)
class AccelerationSpec:
    """Product of acceleration factors; a single factor is the common case."""

    factors: tuple[AccelFactor, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("empty acceleration spec")

    @classmethod
    def constant(cls, b: float) -> "AccelerationSpec":
        return cls((AccelFactor("constant", b),))

    @classmethod
    def identity(cls) -> "AccelerationSpec":
        return cls.constant(1.0)

    def is_identity(self) -> bool:
        return all(f.form == "constant" and f.b == 1.0 for f in self.factors)

    def describe(self) -> str:
        if self.is_identity():
            return "observational (g=1)"
        return " * ".join(f.describe() for f in self.factors)

    def driving_processes(self):
        return tuple(f.process for f in self.factors if f.form == "process_indicator")


def evaluate_g(spec: AccelerationSpec, subject: SubjectPath, t: float) -> float:
    """Rate factor at ``t`` from left-limit state; left-continuous in ``t``."""
    if t <= 0:
        raise ValueError("rate factors are defined for t > 0")
    g = 1.0
    for f in spec.factors:
        g *= f.evaluate(subject, t)
    return g


def parse_accel_spec(source: str) -> AccelerationSpec:
    """Parse an acceleration config: one ``key=value ...`` stanza per factor.

    Stanzas are separated by newlines or semicolons, e.g.::

        form=constant b=2
        form=baseline_indicator cov=x_lci threshold=6 b=2 direction=le
        form=process_indicator process=dial2yr b=2 when=zero

    ``source`` may be the config text itself or a path to a file holding it.
    """
    if isinstance(source, str) and "\n" not in source and os.path.exists(source):
        with open(source) as fh:
            source = fh.read()
    factors = []
    for stanza in source.replace(";", "\n").splitlines():
        stanza = stanza.split("#", 1)[0].strip()
        if not stanza:
            continue
        kv = {}
        for tok in stanza.split():
            if "=" not in tok:
                raise ValueError(f"malformed token {tok!r} in acceleration config")
            key, _, val = tok.partition("=")
            kv[key] = val
        form = kv.pop("form", None)
        if form is None:
            raise ValueError("acceleration stanza missing form=")
        if form == "product":
            # marker line only; the product is the list of factor stanzas
            continue
        try:
            b = float(kv.pop("b"))
        except KeyError:
            raise ValueError("acceleration stanza missing b=") from None
        if b <= 0:
            raise ValueError("nonpositive rate")
        threshold = float(kv.pop("threshold")) if "threshold" in kv else None
        factor = AccelFactor(
            form=form,
            b=b,
            cov=kv.pop("cov", None),
            threshold=threshold,
            direction=kv.pop("direction", "gt"),
            process=kv.pop("process", None),
            when=kv.pop("when", "nonzero"),
        )
        if kv:
            raise ValueError(f"unknown acceleration keys {sorted(kv)}")
        factors.append(factor)
    if not factors:
        raise ValueError("empty acceleration config")
    return AccelerationSpec(tuple(factors))
