"""Command-line entry points: verify | flow | majorant | psi4.

Configuration is plain text, one ``key = value`` per line with ``#``
comments; unknown keys and out-of-range values are rejected before any
computation.  Randomized checks draw from a counter-based generator
(numpy's Philox) keyed by a single 64-bit seed, so instances reproduce
across platforms.  CSV output uses comma separators, ``\\n`` newlines, a
header row, and 12 significant digits; reruns with the same configuration
and seed are byte-identical.

Exit codes: 0 success, 1 failed verification, 2 inadmissible instance,
3 runtime failure, 4 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import psi4
from .algebra import GeneratorSet, GrassmannElement, max_generators
from .errors import (
    CharacteristicCrossingError,
    ConfigError,
    ExistenceError,
    FerroflowError,
)
from .flow import flow_integrate, rg_map, trajectory_norms, trajectory_to_csv
from .gaussian import (
    AntisymmetricCovariance,
    covariance_split_check,
    gaussian_expectation,
    gaussian_moment,
    heat_kernel_convolve,
    pfaffian,
)
from .majorant import (
    MajorantSpec,
    existence_check,
    hopflax_solve,
    majorant_coefficients,
    rhs_coefficient_bound,
)
from .norms import gram_bound_check, norm_coefficients
from .schedule import ScaleSchedule


@dataclass
class RunConfig:
    generators: int = 8
    seed: int = 42
    alpha: float = 0.002
    mass: float = 1.0
    lambda0: float = 2.0
    boxL: float = 4.0
    dimension: int = 4
    tMax: float = 2.0
    steps: int = 400
    sites: int = 4
    cutoffFactor: float = 7.0
    tolerance: float = 1e-9
    truncate: bool = False
    out: str = ""
    debugCorruptPfaffian: bool = False


_RANGES = {
    "generators": (2, 16),
    "seed": (0, 2 ** 64 - 1),
    "alpha": (0.0, 1.0),
    "mass": (1e-6, 1e6),
    "lambda0": (1e-6, 1e6),
    "boxL": (1e-6, 1e6),
    "dimension": (3, 8),
    "tMax": (1e-6, 50.0),
    "steps": (1, 100000),
    "sites": (2, 6),
    "cutoffFactor": (1.0, 64.0),
    "tolerance": (1e-15, 1.0),
}


def _parse_bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"key {key}: expected a boolean, got {raw!r}")


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines into a validated RunConfig."""
    cfg = RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        kind = types[key]
        try:
            if kind in ("bool", bool):
                value = _parse_bool(raw, key)
            elif kind in ("int", int):
                value = int(raw, 0)
            elif kind in ("float", float):
                value = float(raw)
            else:
                value = raw
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {raw!r}") from exc
        setattr(cfg, key, value)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    for key, (lo, hi) in _RANGES.items():
        value = getattr(cfg, key)
        if not lo <= value <= hi:
            raise ConfigError(f"key {key} = {value} outside [{lo}, {hi}]")
    if cfg.generators % 2 != 0:
        raise ConfigError("generators must be even")
    if cfg.generators > max_generators():
        raise ConfigError(
            f"generators = {cfg.generators} exceeds the cap {max_generators()}")
    if cfg.lambda0 <= cfg.mass:
        raise ConfigError("lambda0 must exceed mass")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _rand_antisymmetric(rng, dim: int, scale: float = 1.0) -> np.ndarray:
    m = rng.normal(size=(dim, dim)) * scale
    return m - m.T


def _rand_element(rng, gens: GeneratorSet, scale: float = 1.0) -> GrassmannElement:
    c = rng.normal(size=gens.dim) + 1j * rng.normal(size=gens.dim)
    return GrassmannElement(gens, scale * c)


def _rand_even_normalized(rng, gens: GeneratorSet, scale: float) -> GrassmannElement:
    # real coefficients: the RG map logs the convolved scalar part
    c = rng.normal(size=gens.dim) * scale
    idx = np.arange(gens.dim)
    pop = np.zeros(gens.dim, dtype=int)
    for b in range(gens.count):
        pop += (idx >> b) & 1
    c[pop % 2 == 1] = 0.0
    c[0] = 0.0
    return GrassmannElement(gens, c.astype(np.complex128))


def _synthetic_schedule(rng, pairs: int, T: float = 1.0,
                        scale: float = 0.15) -> ScaleSchedule:
    """Smooth random schedule with a positive-semidefinite derivative kernel
    ``G(tau) G(tau)^T`` and a vectorized Gram rate."""
    g0 = rng.normal(size=(pairs, pairs)) * scale
    g1 = rng.normal(size=(pairs, pairs)) * (0.3 * scale)
    # diag of G G^T is quadratic in sin(tau)
    d_a = np.sum(g0 * g0, axis=1)
    d_b = np.sum(g0 * g1, axis=1)
    d_c = np.sum(g1 * g1, axis=1)

    def cdot(tau: float) -> np.ndarray:
        g = g0 + math.sin(tau) * g1
        return g @ g.T

    def gram_rate(tau):
        if np.ndim(tau) == 0:
            s = math.sin(float(tau))
            return 4.0 * float(np.max(d_a + 2.0 * s * d_b + s * s * d_c))
        s = np.sin(np.asarray(tau, dtype=float))
        diags = d_a[:, None] + 2.0 * s[None, :] * d_b[:, None] \
            + (s * s)[None, :] * d_c[:, None]
        return 4.0 * np.max(diags, axis=0)

    return ScaleSchedule.from_cdot(cdot, T=T, pairs=pairs, gram_rate=gram_rate,
                                   vectorized_rates=True)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


class _CheckTable:
    def __init__(self):
        self.rows: list[tuple[str, bool, str]] = []

    def add(self, name: str, ok: bool, detail: str) -> None:
        self.rows.append((name, bool(ok), detail))

    def render(self) -> str:
        width = max(len(name) for name, _, _ in self.rows)
        lines = []
        for name, ok, detail in self.rows:
            mark = "PASS" if ok else "FAIL"
            lines.append(f"{mark}  {name.ljust(width)}  {detail}")
        total = sum(ok for _, ok, _ in self.rows)
        lines.append(f"{total}/{len(self.rows)} checks passed")
        return "\n".join(lines)

    @property
    def all_passed(self) -> bool:
        return all(ok for _, ok, _ in self.rows)


def cmd_verify(cfg: RunConfig) -> int:
    rng = _make_rng(cfg.seed)
    table = _CheckTable()
    corrupt = 1.0005 if cfg.debugCorruptPfaffian else 1.0

    # Pfaffian squares to the determinant
    worst = 0.0
    witness = ""
    for _ in range(40):
        dim = int(rng.integers(1, 7)) * 2
        a = _rand_antisymmetric(rng, dim)
        pf = pfaffian(a) * corrupt
        det = np.linalg.det(a)
        rel = abs(pf * pf - det) / max(abs(det), 1e-300)
        if rel > worst:
            worst = rel
            if rel > 1e-9:
                witness = f"; counterexample dim={dim}, first row={a[0].tolist()}"
    table.add("pfaffian-identity", worst <= 1e-9, f"worst rel dev {worst:.3e}{witness}")

    # moments against the explicit-density evaluation
    from .algebra import exp_of, wedge
    from .flow import _split_mag

    gens6 = GeneratorSet(6)
    a6 = _rand_antisymmetric(rng, 6)
    worst = 0.0
    ainv = np.linalg.inv(a6)
    quad = GrassmannElement.zero(gens6)
    for i in range(6):
        for j in range(6):
            quad = quad + GrassmannElement.monomial(gens6, [i, j], ainv[i, j])
    dens = exp_of(quad * (-0.5))
    pf_a = pfaffian(a6)
    for mask in range(64):
        idx = [b for b in range(6) if (mask >> b) & 1]
        mono = GrassmannElement.monomial(gens6, idx)
        direct = gaussian_moment(a6, mask)
        oracle = pf_a * wedge(mono, dens).coeffs[-1]
        worst = max(worst, abs(direct - oracle))
    table.add("moment-oracle", worst <= 1e-10, f"worst abs dev {worst:.3e}")

    # heat kernel scalar part and covariance splitting
    gens8 = GeneratorSet(8)
    worst_hk = 0.0
    worst_split = 0.0
    for _ in range(10):
        a = _rand_antisymmetric(rng, 8, 0.3)
        b = _rand_antisymmetric(rng, 8, 0.3)
        f = _rand_element(rng, gens8, 0.5)
        hk = heat_kernel_convolve(a, f)
        worst_hk = max(worst_hk, abs(hk.scalar_part - gaussian_expectation(a, f)))
        worst_split = max(worst_split, covariance_split_check(a, b, f))
    table.add("heat-kernel-moment", worst_hk <= 1e-10, f"worst dev {worst_hk:.3e}")
    table.add("covariance-splitting", worst_split <= 1e-10,
              f"worst residual {worst_split:.3e}")

    # semigroup and parity of the RG map
    worst_semi = 0.0
    worst_odd = 0.0
    cov_scale = 1.6 / cfg.generators  # keep the convolved scalar in the log domain
    for _ in range(5):
        a1 = _rand_antisymmetric(rng, cfg.generators, cov_scale)
        a2 = _rand_antisymmetric(rng, cfg.generators, cov_scale)
        f = _rand_even_normalized(rng, GeneratorSet(cfg.generators), 0.4 / cfg.generators)
        joint = rg_map(a1 + a2, f)
        staged = rg_map(a1, rg_map(a2, f))
        worst_semi = max(worst_semi, float(np.max(np.abs(joint.coeffs - staged.coeffs))))
        even_mag, odd_mag = _split_mag(joint)
        worst_odd = max(worst_odd, odd_mag / max(even_mag, 1e-300))
    table.add("rg-semigroup", worst_semi <= 1e-9, f"worst dev {worst_semi:.3e}")
    table.add("rg-parity", worst_odd <= 1e-10, f"worst odd ratio {worst_odd:.3e}")

    # Gram correlation bound, exhaustive subsets at four pairs
    ok = True
    worst_ratio = 0.0
    for _ in range(3):
        g1 = rng.normal(size=(4, 4))
        g2 = rng.normal(size=(4, 4))
        cov = AntisymmetricCovariance.from_split(
            g1 @ g1.T + 0.1 * np.eye(4), g2 @ g2.T + 0.1 * np.eye(4))
        for mask in range(1, 256):
            rep = gram_bound_check(cov, mask)
            worst_ratio = max(worst_ratio, rep.lhs / max(rep.rhs, 1e-300))
            ok = ok and rep.holds
    table.add("gram-bound", ok, f"worst lhs/rhs {worst_ratio:.6f}")

    # coefficient bound dominates the exact flow
    sched = _synthetic_schedule(rng, 4)
    bare = psi4.quartic_bare_action(GeneratorSet(8), 0.02)
    traj = flow_integrate(sched, bare, steps=200, t_end=1.0)
    series = trajectory_norms(traj)
    ok = True
    worst_margin = float("inf")
    for i in (66, 133, 200):
        for k in range(1, 5):
            bound = rhs_coefficient_bound(traj, sched, k, traj.grid[i])
            margin = bound - series[i].coeff(k)
            worst_margin = min(worst_margin, margin)
            ok = ok and margin >= -1e-8
    table.add("coefficient-bound", ok, f"worst margin {worst_margin:.3e}")

    # majorant domination on the same instance
    spec = MajorantSpec(schedule=sched, quartic_alpha=0.02)
    ok = existence_check(spec, 1.0).holds
    worst_margin = float("inf")
    if ok:
        for i in (66, 133, 200):
            phi = majorant_coefficients(spec, traj.grid[i], m_max=4)
            for m in range(1, 5):
                margin = phi.coeff(m) - series[i].coeff(m)
                worst_margin = min(worst_margin, margin)
                ok = ok and margin >= -1e-8
    table.add("majorant-domination", ok, f"worst margin {worst_margin:.3e}")

    # Hopf-Lax comparison
    ys = np.linspace(-3.0, 3.0, 1001)
    ok = True
    for _ in range(5):
        coeffs = rng.normal(size=3) * 0.3
        g1 = coeffs[0] * np.sin(0.7 * ys) + coeffs[1] * np.cos(0.4 * ys) \
            + 0.05 * coeffs[2] * ys ** 2
        g2 = g1 + 0.1 + 0.1 * np.cos(0.5 * ys) ** 2
        for z in np.linspace(-1.0, 1.0, 11):
            w1 = hopflax_solve(ys, g1, 0.8, float(z))
            w2 = hopflax_solve(ys, g2, 0.8, float(z))
            ok = ok and (w2 - w1 >= -1e-10)
    table.add("hopflax-comparison", ok, "monotone on sampled pairs")

    print(table.render())
    return 0 if table.all_passed else 1


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _desk_instance(cfg: RunConfig) -> psi4.DeskInstance:
    params = psi4.Psi4Params(
        dimension=cfg.dimension, mass=cfg.mass, lambda0=cfg.lambda0,
        box=cfg.boxL, cutoff_factor=cfg.cutoffFactor)
    return psi4.build_desk_instance(params, cfg.alpha, n_sites=cfg.sites,
                                    t_max=cfg.tMax)


def _write(path: str, text: str) -> None:
    Path(path).write_bytes(text.encode("ascii"))


def cmd_flow(cfg: RunConfig) -> int:
    inst = _desk_instance(cfg)
    traj = flow_integrate(inst.schedule, inst.bare_action, steps=cfg.steps,
                          t_end=cfg.tMax, truncate_ge2=cfg.truncate)
    csv = trajectory_to_csv(traj)
    out = cfg.out or "flow.csv"
    _write(out, csv)
    print(f"wrote {out} ({len(traj.grid)} grid points)")
    for note in traj.notes:
        print(f"note: {note}")
    return 0


def cmd_majorant(cfg: RunConfig) -> int:
    inst = _desk_instance(cfg)
    spec = MajorantSpec(schedule=inst.schedule, quartic_alpha=inst.alpha)
    report = existence_check(spec, cfg.tMax)
    out = cfg.out or "majorant.csv"
    report_path = out + ".existence.txt"
    _write(report_path, report.as_text())
    print(report.as_text(), end="")
    if not report.holds:
        print("existence condition fails; no majorant CSV written")
        return 2
    traj = flow_integrate(inst.schedule, inst.bare_action, steps=cfg.steps,
                          t_end=cfg.tMax, truncate_ge2=cfg.truncate)
    series = trajectory_norms(traj)
    n = inst.generators.pairs
    picks = np.unique(np.linspace(0, len(traj.grid) - 1, 11).astype(int))
    lines = ["t,m,F_m,phi_m,margin"]
    worst = float("inf")
    for i in picks:
        t = float(traj.grid[i])
        phi = majorant_coefficients(spec, t, m_max=n)
        for m in range(1, n + 1):
            fm = series[i].coeff(m)
            pm = phi.coeff(m)
            margin = pm - fm
            worst = min(worst, margin)
            lines.append(f"{_fmt(t)},{m},{_fmt(fm)},{_fmt(pm)},{_fmt(margin)}")
    _write(out, "\n".join(lines) + "\n")
    print(f"wrote {out}; worst margin {worst:.3e}")
    if worst < -cfg.tolerance:
        print("margin below tolerance")
        return 1
    return 0


def cmd_psi4(cfg: RunConfig) -> int:
    params = psi4.Psi4Params(
        dimension=cfg.dimension, mass=cfg.mass, lambda0=cfg.lambda0,
        box=cfg.boxL, cutoff_factor=cfg.cutoffFactor)
    header_lines = []
    bound = None
    if cfg.dimension == 4:
        bound = psi4.coupling_bound(params)
        header_lines.append(f"# coupling_bound = {_fmt(bound)}")
        if cfg.alpha > bound:
            header_lines.append(
                f"# warning: alpha = {_fmt(cfg.alpha)} exceeds the coupling bound")
            clock = psi4.effective_flow_time(params, cfg.tMax)
            sigma_resc = math.sqrt(
                psi4.sigma_squared_closed_form(params, 0.0, cfg.tMax)) / params.lambda0
            window = 1.0 - 12.0 * cfg.alpha * clock.value * sigma_resc ** 2
            if window <= 0.0:
                print("\n".join(header_lines))
                print(f"rescaled existence window closed ({window:.3e}); aborting")
                return 2
    rows = ["s,Lambda_s,cdot_norm,sigma2,tau_tilde,tau_tilde_bound"]
    count = min(cfg.steps, 200)
    for s in np.linspace(0.0, cfg.tMax, count + 1):
        s = float(s)
        lam = params.lambda_at(s)
        rate = psi4.covariance_rate_norm(params, s)
        sig2 = psi4.sigma_squared_closed_form(params, 0.0, s)
        clock = psi4.effective_flow_time(params, s)
        rows.append(f"{_fmt(s)},{_fmt(lam)},{_fmt(rate)},{_fmt(sig2)},"
                    f"{_fmt(clock.value)},{_fmt(clock.bound)}")
    out = cfg.out or "psi4.csv"
    _write(out, "\n".join(header_lines + rows) + "\n")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ferroflow",
        description="Fermionic RG flows with Hamilton-Jacobi norm majorants")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("verify", "run the invariant battery and print a check table"),
            ("flow", "integrate a desk-scale flow and emit t,m,F_m CSV"),
            ("majorant", "emit majorant coefficients, margins, and existence"),
            ("psi4", "emit the scale summary of the quartic model")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=str, default=None, help="config file path")
        p.add_argument("--out", type=str, default=None, help="output CSV path")
        p.add_argument("--seed", type=int, default=None, help="64-bit seed")
        p.add_argument("--truncate", action="store_true",
                       help="project the flow onto degree >= 4")
        p.add_argument("--generators", type=int, default=None,
                       help="generator count for randomized checks")
        if name == "verify":
            p.add_argument("--debug-corrupt-pfaffian", action="store_true",
                           help="fault injection: break the Pfaffian normalization")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else ""
        cfg = parse_config(text)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.truncate:
            cfg.truncate = True
        if args.generators is not None:
            cfg.generators = args.generators
        if getattr(args, "debug_corrupt_pfaffian", False):
            cfg.debugCorruptPfaffian = True
        validate_config(cfg)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 4
    try:
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "flow":
            return cmd_flow(cfg)
        if args.command == "majorant":
            return cmd_majorant(cfg)
        if args.command == "psi4":
            return cmd_psi4(cfg)
    except (ExistenceError, CharacteristicCrossingError) as exc:
        print(f"inadmissible instance: {exc}", file=sys.stderr)
        return 2
    except FerroflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
