"""Theorem knowledge base: tuples, rules, lookup, file format.

Each knowledge tuple maps an operator to one or more arity variants, and
each variant carries the theorem formula, commutative operand groups,
semantic rules, and a hand-checked witness assignment.  The builtin base
of 34 operators is shipped as a data file in the same format accepted by
load_kb, so user bases round-trip through dump_kb/load_kb.

Rule syntax: comparison chains over operand placeholders, e.g.
"0 < c < 90" or "a + b > c".  A comma list on the left distributes
("a, b, c > 0"), and "*" stands for every operand of a variadic variant.
Relational rules are opaque tags written "@tag(description)"; they pass
unless a hook is registered with the verifier.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .errors import DuplicateOperator, KBFormatError, MathDomain, UnboundVariable
from .expr import (
    Add,
    Cos,
    Equation,
    Expr,
    Interval,
    Mul,
    Pow,
    Sin,
    Tan,
    Var,
    VarId,
    eval_expr,
    free_vars,
    parse_expr,
    render,
)

_CMP_SPLIT = re.compile(r"(<=|>=|<|>)")
_LENGTH_DOMAIN = Interval(0.0, 1e6)
_ANGLE_DOMAIN = Interval(0.0, 360.0)
_MAX_VARIADIC = 26  # one placeholder letter per operand


@dataclass(frozen=True)
class ValueRule:
    """A chain of comparisons over operand placeholders."""

    terms: tuple[Expr, ...]
    ops: tuple[str, ...]
    wildcard: bool = False
    wildcard_source: str = ""

    @property
    def source(self) -> str:
        if self.wildcard:
            return self.wildcard_source
        parts = [render(self.terms[0])]
        for op, term in zip(self.ops, self.terms[1:]):
            parts.append(op)
            parts.append(render(term))
        return " ".join(parts)

    def placeholders(self) -> set[VarId]:
        out: set[VarId] = set()
        for term in self.terms:
            out |= free_vars(term)
        return out

    def evaluate(self, env: dict[VarId, float]) -> Optional[bool]:
        """True/False when all terms are bound, None when not evaluable."""
        values = []
        for term in self.terms:
            try:
                values.append(eval_expr(term, env))
            except (UnboundVariable, MathDomain):
                return None
        for a, op, b in zip(values, self.ops, values[1:]):
            ok = {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
            if not ok:
                return False
        return True

    def bounds_for(self, target: VarId, env: dict[VarId, float]) -> Interval:
        """Domain bounds this rule implies for `target`, given other bindings."""
        lo, hi = -math.inf, math.inf
        for a, op, b in zip(self.terms, self.ops, self.terms[1:]):
            lt = op in ("<", "<=")
            closed = op in ("<=", ">=")
            left_is_target = isinstance(a, Var) and a.var == target
            right_is_target = isinstance(b, Var) and b.var == target
            other = b if left_is_target else a
            if not (left_is_target or right_is_target):
                continue
            try:
                value = eval_expr(other, env)
            except (UnboundVariable, MathDomain):
                continue
            pad = 1e-9 * max(1.0, abs(value)) if closed else 0.0
            upper = (left_is_target and lt) or (right_is_target and not lt)
            if upper:
                hi = min(hi, value + pad)
            else:
                lo = max(lo, value - pad)
        return Interval(lo, hi)


@dataclass(frozen=True)
class RelationalRule:
    """Diagram-dependent rule checked by an optional registered hook."""

    tag: str
    description: str = ""

    @property
    def source(self) -> str:
        return f"@{self.tag}({self.description})" if self.description else f"@{self.tag}"


SemanticRule = Union[ValueRule, RelationalRule]


def parse_rules(text: str) -> list[SemanticRule]:
    """Parse a ';'-separated rule list."""
    rules: list[SemanticRule] = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if chunk.startswith("@"):
            m = re.match(r"@([A-Za-z0-9_-]+)(?:\((.*)\))?$", chunk)
            if not m:
                raise KBFormatError(f"malformed relational rule {chunk!r}")
            rules.append(RelationalRule(m.group(1), m.group(2) or ""))
            continue
        if "*" in chunk and re.search(r"(^|[\s,])\*($|[\s,])", chunk):
            rules.append(ValueRule((), (), wildcard=True,
                                   wildcard_source=re.sub(r"\s+", " ", chunk)))
            continue
        rules.extend(_parse_comparison(chunk))
    return rules


def _parse_comparison(text: str) -> list[ValueRule]:
    parts = [p.strip() for p in _CMP_SPLIT.split(text)]
    if len(parts) < 3 or len(parts) % 2 == 0:
        raise KBFormatError(f"malformed rule {text!r}")
    exprs, ops = parts[0::2], parts[1::2]
    heads = [h.strip() for h in exprs[0].split(",")]
    tail_exprs = [parse_expr(p) for p in exprs[1:]]
    out = []
    for head in heads:
        terms = (parse_expr(head),) + tuple(tail_exprs)
        out.append(ValueRule(terms, tuple(ops)))
    return out


def _trig_arg_placeholders(formula: Optional[Equation]) -> frozenset[VarId]:
    if formula is None:
        return frozenset()
    found: set[VarId] = set()

    def walk(node: Expr) -> None:
        if isinstance(node, (Sin, Cos, Tan)):
            found.update(free_vars(node.operand))
            walk(node.operand)
        else:
            for attr in ("operand", "left", "right", "base", "exponent"):
                child = getattr(node, attr, None)
                if child is not None:
                    walk(child)

    walk(formula.lhs)
    walk(formula.rhs)
    return frozenset(found)


class ChainKind:
    SUM = "sum"
    PRODUCT = "product"


@dataclass(frozen=True)
class TupleVariant:
    placeholders: tuple[str, ...]
    formula: Optional[Equation]  # None for pure value lookup (Get)
    commutative_groups: tuple[frozenset[int], ...] = ()
    rules: tuple[SemanticRule, ...] = ()
    variadic: bool = False
    chain: Optional[str] = None  # ChainKind for variadic variants
    witness: tuple[tuple[str, str], ...] = ()  # placeholder -> value expression

    @property
    def min_arity(self) -> int:
        return len(self.placeholders)

    def value_rules(self) -> list[ValueRule]:
        return [r for r in self.rules if isinstance(r, ValueRule)]

    def relational_rules(self) -> list[RelationalRule]:
        return [r for r in self.rules if isinstance(r, RelationalRule)]

    def placeholder_vars(self) -> list[VarId]:
        return [VarId.arg(p) for p in self.placeholders]

    def instantiate(self, arity: int) -> Optional["TupleVariant"]:
        """Concrete variant for the requested operand count."""
        if not self.variadic:
            return self if arity == len(self.placeholders) else None
        if arity < self.min_arity or arity > _MAX_VARIADIC:
            return None
        letters = tuple(chr(ord("a") + i) for i in range(arity))
        node_cls = Add if self.chain == ChainKind.SUM else Mul
        lhs: Expr = Var(VarId.arg(letters[0]))
        for letter in letters[1:-1]:
            lhs = node_cls(lhs, Var(VarId.arg(letter)))
        formula = Equation(lhs, Var(VarId.arg(letters[-1])))
        rules: list[SemanticRule] = []
        for rule in self.rules:
            if isinstance(rule, ValueRule) and rule.wildcard:
                for letter in letters:
                    expanded = re.sub(r"(^|[\s,])\*($|[\s,])",
                                      lambda m: m.group(1) + letter + m.group(2),
                                      rule.wildcard_source)
                    rules.extend(_parse_comparison(expanded))
            else:
                rules.append(rule)
        return replace(
            self,
            placeholders=letters,
            formula=formula,
            commutative_groups=(frozenset(range(arity - 1)),),
            rules=tuple(rules),
            variadic=False,
            chain=None,
        )

    def domain_for(self, placeholder: str, env: dict[VarId, float]) -> Interval:
        """Search domain for one unbound placeholder, narrowed by rules.

        Defaults: placeholders appearing inside a trig argument get the
        angle window (0, 360); everything else is a positive textbook
        quantity (0, 1e6).
        """
        target = VarId.arg(placeholder)
        if target in _trig_arg_placeholders(self.formula):
            domain = _ANGLE_DOMAIN
        else:
            domain = _LENGTH_DOMAIN
        for rule in self.value_rules():
            if rule.wildcard:
                continue
            if target in rule.placeholders():
                domain = domain.intersect(rule.bounds_for(target, env))
        return domain


@dataclass(frozen=True)
class KnowledgeTuple:
    operator: str
    aliases: tuple[str, ...] = ()
    variants: tuple[TupleVariant, ...] = ()

    def match_variant(self, arity: int) -> Optional[TupleVariant]:
        for variant in self.variants:
            if not variant.variadic and variant.min_arity == arity:
                return variant
        for variant in self.variants:
            if variant.variadic:
                match = variant.instantiate(arity)
                if match is not None:
                    return match
        return None


@dataclass
class KnowledgeBase:
    tuples: dict[str, KnowledgeTuple]

    def __post_init__(self):
        index: dict[str, str] = {}
        for name, tup in self.tuples.items():
            index[name] = name
            for alias in tup.aliases:
                index[alias] = name
        self._alias_index = index

    def canonical_name(self, name: str) -> Optional[str]:
        return self._alias_index.get(name)

    def base_search(self, op: str) -> Optional[KnowledgeTuple]:
        canonical = self.canonical_name(op)
        return self.tuples.get(canonical) if canonical else None

    def operators(self) -> list[str]:
        return list(self.tuples)

    def __len__(self) -> int:
        return len(self.tuples)


def base_search(kb: KnowledgeBase, op: str) -> Optional[KnowledgeTuple]:
    """NotFound is returned as None; Algorithm consumers break on it."""
    return kb.base_search(op)


def match_variant(tup: KnowledgeTuple, arity: int) -> Optional[TupleVariant]:
    """Exact-arity variant, or the variadic one for arity >= its minimum."""
    return tup.match_variant(arity)


# --- file format -----------------------------------------------------------

_VARIANT_RE = re.compile(r"variant\s*\(([^)]*)\)\s*(variadic)?\s*$")
_GROUP_RE = re.compile(r"\(([^)]*)\)")


def _parse_formula(text: str, placeholders: tuple[str, ...], variadic: bool,
                   line_no: int) -> tuple[Optional[Equation], Optional[str]]:
    if text.count("=") != 1:
        raise KBFormatError("formula needs exactly one '='", line=line_no, field="formula")
    lhs_text, rhs_text = text.split("=")
    if variadic:
        stripped = lhs_text.replace(" ", "")
        m = re.fullmatch(r"([a-z])\+([a-z])\+\.\.\.", stripped)
        kind = ChainKind.SUM
        if m is None:
            m = re.fullmatch(r"([a-z])\*([a-z])\*\.\.\.", stripped)
            kind = ChainKind.PRODUCT
        if m is None:
            raise KBFormatError(
                "variadic formula must be 'a + b + ... = z' or 'a * b * ... = z'",
                line=line_no, field="formula")
        return None, kind
    equation = Equation(parse_expr(lhs_text), parse_expr(rhs_text))
    declared = {VarId.arg(p) for p in placeholders}
    undeclared = equation.free_vars() - declared
    if undeclared:
        raise KBFormatError(
            f"formula references undeclared placeholders {sorted(v.label for v in undeclared)}",
            line=line_no, field="formula")
    return equation, None


def loads_kb(text: str, source: str = "<string>") -> KnowledgeBase:
    """Parse knowledge-base text (see data/builtin.kb for the format)."""
    tuples: dict[str, KnowledgeTuple] = {}
    cur_op: Optional[str] = None
    cur_aliases: list[str] = []
    cur_variants: list[TupleVariant] = []
    pending: Optional[dict] = None  # the variant being assembled

    def finish_variant(line_no: int) -> None:
        nonlocal pending
        if pending is None:
            return
        # A variant without a formula is bookkeeping (Get-style value lookup).
        formula, chain = (None, None)
        if pending["formula_text"] is not None:
            formula, chain = _parse_formula(pending["formula_text"],
                                            pending["placeholders"],
                                            pending["variadic"], pending["line"])
        declared = set(pending["placeholders"])
        rules = tuple(pending["rules"])
        for rule in rules:
            if isinstance(rule, ValueRule) and not rule.wildcard:
                extra = {v.label for v in rule.placeholders()} - declared
                if extra:
                    raise KBFormatError(
                        f"rule {rule.source!r} references undeclared placeholders {sorted(extra)}",
                        line=pending["line"], field="rules")
            if isinstance(rule, ValueRule) and rule.wildcard and not pending["variadic"]:
                raise KBFormatError("'*' rules are only valid on variadic variants",
                                    line=pending["line"], field="rules")
        if pending["variadic"] and any(
                isinstance(r, ValueRule) and not r.wildcard for r in rules):
            raise KBFormatError("variadic variants accept only '*' value rules",
                                line=pending["line"], field="rules")
        groups = []
        for group in pending["commutative"]:
            indices = frozenset(pending["placeholders"].index(g) for g in group)
            groups.append(indices)
        if any(g1 & g2 for i, g1 in enumerate(groups) for g2 in groups[i + 1:]):
            raise KBFormatError("commutative groups overlap",
                                line=pending["line"], field="commutative")
        cur_variants.append(TupleVariant(
            placeholders=pending["placeholders"],
            formula=formula,
            commutative_groups=tuple(groups),
            rules=rules,
            variadic=pending["variadic"],
            chain=chain,
            witness=tuple(pending["witness"]),
        ))
        pending = None

    def finish_tuple(line_no: int) -> None:
        nonlocal cur_op, cur_aliases, cur_variants
        finish_variant(line_no)
        if cur_op is None:
            return
        if not cur_variants:
            raise KBFormatError(f"tuple {cur_op!r} has no variants", line=line_no)
        arities = [v.min_arity for v in cur_variants if not v.variadic]
        if len(arities) != len(set(arities)):
            raise KBFormatError(f"tuple {cur_op!r} repeats an operand count", line=line_no)
        if cur_op in tuples:
            raise DuplicateOperator(cur_op, line=line_no)
        tuples[cur_op] = KnowledgeTuple(cur_op, tuple(cur_aliases), tuple(cur_variants))
        cur_op, cur_aliases, cur_variants = None, [], []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("tuple "):
            finish_tuple(line_no)
            cur_op = line[len("tuple "):].strip()
            if not cur_op:
                raise KBFormatError("tuple line missing operator name", line=line_no)
            continue
        if cur_op is None:
            raise KBFormatError(f"unexpected line outside tuple: {line!r}", line=line_no)
        if line.startswith("aliases:"):
            cur_aliases = [a.strip() for a in line[len("aliases:"):].split(",") if a.strip()]
            continue
        m = _VARIANT_RE.match(line)
        if m:
            finish_variant(line_no)
            names = [n.strip() for n in m.group(1).split(",") if n.strip()]
            variadic = m.group(2) is not None or "..." in names
            names = [n for n in names if n != "..."]
            for n in names:
                if not (len(n) == 1 and n.islower()):
                    raise KBFormatError(f"bad placeholder {n!r}", line=line_no, field="variant")
            if len(names) != len(set(names)):
                raise KBFormatError("repeated placeholder", line=line_no, field="variant")
            pending = {"placeholders": tuple(names), "variadic": variadic,
                       "formula_text": None, "commutative": [], "rules": [],
                       "witness": [], "line": line_no}
            continue
        if pending is None:
            raise KBFormatError(f"field before any variant: {line!r}", line=line_no)
        if line.startswith("formula:"):
            pending["formula_text"] = line[len("formula:"):].strip()
        elif line.startswith("commutative:"):
            for group in _GROUP_RE.findall(line[len("commutative:"):]):
                names = [n.strip() for n in group.split(",") if n.strip()]
                for n in names:
                    if n not in pending["placeholders"]:
                        raise KBFormatError(f"commutative references unknown placeholder {n!r}",
                                            line=line_no, field="commutative")
                pending["commutative"].append(names)
        elif line.startswith("rules:"):
            try:
                pending["rules"].extend(parse_rules(line[len("rules:"):]))
            except KBFormatError as exc:
                raise KBFormatError(str(exc), line=line_no, field="rules") from None
        elif line.startswith("witness:"):
            for item in line[len("witness:"):].split(","):
                item = item.strip()
                if not item:
                    continue
                if "=" not in item:
                    raise KBFormatError(f"witness item {item!r} needs '='",
                                        line=line_no, field="witness")
                name, value = item.split("=", 1)
                pending["witness"].append((name.strip(), value.strip()))
        else:
            raise KBFormatError(f"unrecognized line: {line!r}", line=line_no)
    finish_tuple(len(text.splitlines()) + 1)
    return KnowledgeBase(tuples)


def load_kb(path: str | Path) -> KnowledgeBase:
    path = Path(path)
    return loads_kb(path.read_text(encoding="utf-8"), source=str(path))


def dump_kb(kb: KnowledgeBase) -> str:
    """Re-encode a base in the load_kb format."""
    lines: list[str] = []
    for name, tup in kb.tuples.items():
        lines.append(f"tuple {name}")
        if tup.aliases:
            lines.append(f"  aliases: {', '.join(tup.aliases)}")
        for variant in tup.variants:
            header = ", ".join(variant.placeholders)
            if variant.variadic:
                head = ", ".join(variant.placeholders[:-1])
                header = f"{head}, ..., {variant.placeholders[-1]}"
                lines.append(f"  variant ({header}) variadic")
            else:
                lines.append(f"  variant ({header})")
            if variant.variadic:
                joiner = " + " if variant.chain == ChainKind.SUM else " * "
                chain_head = joiner.join(variant.placeholders[:-1])
                lines.append(f"    formula: {chain_head}{joiner}... = {variant.placeholders[-1]}")
            elif variant.formula is not None:
                lines.append(f"    formula: {variant.formula}")
            if variant.commutative_groups:
                groups = " ".join(
                    "(" + ", ".join(variant.placeholders[i] for i in sorted(g)) + ")"
                    for g in variant.commutative_groups)
                lines.append(f"    commutative: {groups}")
            if variant.rules:
                lines.append(f"    rules: {'; '.join(r.source for r in variant.rules)}")
            if variant.witness:
                items = ", ".join(f"{k} = {v}" for k, v in variant.witness)
                lines.append(f"    witness: {items}")
        lines.append("")
    return "\n".join(lines)


@lru_cache(maxsize=1)
def builtin_kb() -> KnowledgeBase:
    """The 34-operator builtin base, loaded once from package data."""
    text = resources.files("geoprog").joinpath("data/builtin.kb").read_text("utf-8")
    return loads_kb(text, source="builtin.kb")


# --- witness checking ------------------------------------------------------

@dataclass
class WitnessResult:
    operator: str
    arity: int
    ok: bool
    residual: Optional[float]
    detail: str = ""


@dataclass
class KbCheckReport:
    operator_count: int
    results: list[WitnessResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def summary(self) -> str:
        failed = [r for r in self.results if not r.ok]
        if not failed and self.ok:
            return (f"{self.operator_count} operators, "
                    f"all {len(self.results)} witnesses satisfied")
        lines = [f"{self.operator_count} operators, {len(failed)} witness failures"]
        lines += [f"  {r.operator}/{r.arity}: {r.detail}" for r in failed]
        return "\n".join(lines)


def check_kb(kb: KnowledgeBase, residual_tol: float = 1e-9) -> KbCheckReport:
    """Verify every variant's witness: small residual, value rules true."""
    report = KbCheckReport(operator_count=len(kb))
    for name, tup in kb.tuples.items():
        for variant in tup.variants:
            arity = variant.min_arity
            concrete = variant.instantiate(arity) if variant.variadic else variant
            env: dict[VarId, float] = {}
            try:
                for key, value in variant.witness:
                    env[VarId.arg(key)] = eval_expr(parse_expr(value))
            except Exception as exc:
                report.results.append(WitnessResult(name, arity, False, None,
                                                    f"witness unparseable: {exc}"))
                continue
            missing = {VarId.arg(p) for p in concrete.placeholders} - set(env)
            if not variant.witness:
                report.results.append(WitnessResult(name, arity, False, None,
                                                    "no witness shipped"))
                continue
            if missing:
                report.results.append(WitnessResult(
                    name, arity, False, None,
                    f"witness misses {sorted(v.label for v in missing)}"))
                continue
            residual = None
            if concrete.formula is not None:
                try:
                    residual = concrete.formula.residual(env)
                except MathDomain as exc:
                    report.results.append(WitnessResult(name, arity, False, None, str(exc)))
                    continue
                if abs(residual) >= residual_tol:
                    report.results.append(WitnessResult(
                        name, arity, False, residual,
                        f"residual {residual:.3e} above {residual_tol}"))
                    continue
            broken = None
            for rule in concrete.value_rules():
                if rule.evaluate(env) is False:
                    broken = rule
                    break
            if broken is not None:
                report.results.append(WitnessResult(
                    name, arity, False, residual, f"rule violated: {broken.source}"))
                continue
            report.results.append(WitnessResult(name, arity, True, residual))
    return report
