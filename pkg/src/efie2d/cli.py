"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import ExcitationSpec, assemble_G, assemble_rhs, assemble_S_and_N, solve_system
from .errors import AccuracyFailure, InvalidArgument, NumericDomainError, NumericError, Unsupported
from .geometry import build_mesh, parse_curve
from .kernels import FAMILIES, KernelSpec, canonical_family
from .spectral import build_lb_basis, calderon_product, order_by_lb_modes

SPEED_OF_LIGHT = 299792458.0
EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3


class ConfigError(InvalidArgument):
    pass


@dataclass
class RunConfig:
    curve: str = "circle:1"
    n: int | None = None
    h: float | None = None
    h_over_lambda: float | None = None
    k: float | None = None
    freq: float | None = None
    eta: float = 376.730313668
    kernel: str = "dynamic"
    alpha: str | None = None
    op: str = "S"
    ordering: str = "response"
    spacing: str = "arclength"
    out: str = "efie2d_out"
    threads: int = 1
    extra: dict = field(default_factory=dict)

    # resolved values
    def wavenumber(self) -> float:
        if (self.k is None) == (self.freq is None):
            raise ConfigError("give exactly one of --k and --freq")
        if self.freq is not None:
            if not self.freq > 0:
                raise ConfigError("frequency must be positive")
            return 2.0 * math.pi * self.freq / SPEED_OF_LIGHT
        if self.k < 0 or not math.isfinite(self.k):
            raise ConfigError("k must be finite and non-negative")
        return float(self.k)

    def cutoff(self, k: float) -> float | None:
        if self.alpha is None:
            return None
        text = str(self.alpha).strip().lower()
        try:
            if text.endswith("k"):
                factor = float(text[:-1] or "1")
                if k == 0:
                    raise ConfigError("alpha relative to k needs k > 0")
                return factor * k
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"cannot parse alpha {self.alpha!r}") from exc

    def kernel_spec(self) -> KernelSpec:
        k = self.wavenumber()
        family = canonical_family(self.kernel)
        alpha = self.cutoff(k)
        if family.endswith("filtered") and alpha is None:
            raise ConfigError(f"kernel {family} needs --alpha")
        return KernelSpec(family, k, alpha)

    def mesh(self, k: float):
        curve = parse_curve(self.curve)
        given = [v is not None for v in (self.n, self.h, self.h_over_lambda)]
        if sum(given) != 1:
            raise ConfigError("give exactly one of --N, --h and --h-over-lambda")
        if self.n is not None:
            n = int(self.n)
        else:
            h = self.h
            if self.h_over_lambda is not None:
                if k <= 0:
                    raise ConfigError("--h-over-lambda needs a positive wavenumber")
                h = self.h_over_lambda * 2.0 * math.pi / k
            if not h or h <= 0:
                raise ConfigError("target h must be positive")
            n = max(8, int(math.ceil(curve.total_arclength() / h)))
        return build_mesh(curve, n, spacing=self.spacing)

    def header(self, **resolved) -> str:
        items = {
            "efie2d": __version__,
            "curve": self.curve,
            "N": self.n,
            "h": self.h,
            "h_over_lambda": self.h_over_lambda,
            "k": self.k,
            "freq": self.freq,
            "eta": self.eta,
            "kernel": self.kernel,
            "alpha": self.alpha,
            "op": self.op,
            "ordering": self.ordering,
            "spacing": self.spacing,
        }
        items.update(resolved)
        return "\n".join(f"{key}={value}" for key, value in items.items())


def _read_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_").lower()] = value.strip("\"'")
    return values


_FIELD_TYPES = {"n": int, "h": float, "h_over_lambda": float, "k": float, "freq": float, "eta": float, "threads": int}


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(_read_config_file(args.config))
    for name in ("curve", "n", "h", "h_over_lambda", "k", "freq", "eta", "kernel", "alpha", "op", "ordering", "spacing", "out", "threads"):
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if "threads" not in values:
        values["threads"] = os.environ.get("EFIE2D_THREADS", 1)
    cfg = RunConfig()
    for key, value in values.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown configuration key {key!r}")
        if value is not None and key in _FIELD_TYPES:
            try:
                value = _FIELD_TYPES[key](value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        setattr(cfg, key, value)
    if cfg.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if cfg.op not in ("S", "N", "calderon"):
        raise ConfigError(f"--op must be S, N or calderon, got {cfg.op!r}")
    return cfg


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _spectrum_for(cfg, mesh, spec, basis, gram):
    s, n = assemble_S_and_N(mesh, spec, threads=cfg.threads)
    if cfg.op == "S":
        op = s
    elif cfg.op == "N":
        op = n
    else:
        op = calderon_product(s, n, gram)
    return order_by_lb_modes(op, basis, gram, ordering=cfg.ordering, kernel=spec, operator=cfg.op)


def cmd_spectrum(cfg: RunConfig) -> int:
    spec = cfg.kernel_spec()
    mesh = cfg.mesh(spec.k)
    gram = assemble_G(mesh)
    basis = build_lb_basis(mesh)
    header = cfg.header(resolved_k=repr(spec.k), resolved_alpha=repr(spec.alpha), resolved_N=mesh.size, mesh=mesh.tag)
    out = Path(cfg.out)
    specs = [("", spec)]
    if spec.is_filtered:
        specs.append((".unfiltered", spec.unfiltered()))
    for suffix, sp in specs:
        report = _spectrum_for(cfg, mesh, sp, basis, gram)
        report.metadata["config"] = header
        _write(out.with_name(out.name + suffix + ".csv"), report.to_csv(header))
        _write(out.with_name(out.name + suffix + ".json"), report.to_json())
    return 0


def cmd_kernel_trace(cfg: RunConfig, rmin: float, rmax: float, points: int) -> int:
    spec = cfg.kernel_spec()
    if not (0 < rmin < rmax) or points < 2:
        raise ConfigError("need 0 < rmin < rmax and points >= 2")
    grid = np.logspace(math.log10(rmin), math.log10(rmax), points)
    if rmin <= 1.0 <= rmax:
        grid = np.unique(np.append(grid, 1.0))
    if spec.is_filtered:
        grid = np.concatenate([[0.0], grid])
    vals = spec.evaluate(grid)
    header = cfg.header(resolved_k=repr(spec.k), resolved_alpha=repr(spec.alpha), rmin=rmin, rmax=rmax, points=points)
    lines = [f"# {line}" for line in header.splitlines()] + ["r,re_g,im_g"]
    lines += [f"{r!r},{v.real!r},{v.imag!r}" for r, v in zip(grid.tolist(), vals.tolist())]
    _write(Path(cfg.out + ".csv"), "\n".join(lines) + "\n")
    return 0


def cmd_assemble(cfg: RunConfig, fmt: str) -> int:
    spec = cfg.kernel_spec()
    mesh = cfg.mesh(spec.k)
    gram = assemble_G(mesh)
    s, n = assemble_S_and_N(mesh, spec, threads=cfg.threads)
    ops = {"S": s, "N": n, "calderon": calderon_product(s, n, gram)}
    op = ops[cfg.op]
    if fmt == "binary":
        path = Path(cfg.out + ".ef2d")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(op.to_bytes())
        print(f"wrote {path}")
    else:
        _write(Path(cfg.out + ".csv"), op.to_csv())
    _write(Path(cfg.out + ".mesh.csv"), mesh.to_csv())
    return 0


def cmd_solve(cfg: RunConfig, polarization: str, angle_deg: float) -> int:
    spec = cfg.kernel_spec()
    if spec.k <= 0:
        raise ConfigError("scattering needs k > 0")
    mesh = cfg.mesh(spec.k)
    theta = math.radians(angle_deg)
    exc = ExcitationSpec(polarization, (math.cos(theta), math.sin(theta)), spec.k, cfg.eta)
    s, n = assemble_S_and_N(mesh, spec, threads=cfg.threads)
    a = s if exc.polarization == "TM" else n
    b = assemble_rhs(mesh, exc)
    x = solve_system(a, b)
    resid = float(np.linalg.norm(a.entries @ x - b) / np.linalg.norm(b))
    header = cfg.header(polarization=exc.polarization, angle_deg=angle_deg, resolved_k=repr(spec.k), residual=f"{resid:.3e}")
    lines = [f"# {line}" for line in header.splitlines()] + ["index,x,y,re_j,im_j"]
    lines += [f"{i},{p[0]!r},{p[1]!r},{v.real!r},{v.imag!r}" for i, (p, v) in enumerate(zip(mesh.nodes.tolist(), x.tolist()))]
    _write(Path(cfg.out + ".csv"), "\n".join(lines) + "\n")
    print(f"relative residual {resid:.3e}")
    return 0


def cmd_verify(level: str, inject: str | None, out: str | None) -> int:
    from . import kernels
    from .verify import run_suite

    saved = kernels.MS_TAIL_SIGN
    if inject == "ms-sign-flip":
        kernels.MS_TAIL_SIGN = -saved
    elif inject:
        raise ConfigError(f"unknown injection {inject!r}")
    try:
        results = run_suite(level)
    finally:
        kernels.MS_TAIL_SIGN = saved
    width = max(len(r.name) for r in results)
    print(f"{'check'.ljust(width)}  {'max error':>11}  {'tolerance':>10}  status")
    for r in results:
        print(f"{r.name.ljust(width)}  {r.error:11.3e}  {r.tol:10.1e}  {'PASS' if r.passed else 'FAIL'}")
    if level == "full" or out:
        path = Path(out or "verify_table.json")
        _write(path, json.dumps([r.as_dict() for r in results], indent=2))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return 0


def cmd_quad_selftest() -> int:
    from .verify import quadrature_checks

    results = quadrature_checks()
    for r in results:
        print(f"{r.name:40s} {r.error:11.3e} {r.tol:9.1e} {'PASS' if r.passed else 'FAIL'}")
    return 0 if all(r.passed for r in results) else EXIT_VERIFY


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--curve", help="kind[:params], e.g. circle:0.8, ellipse:1,0.5, kite")
    p.add_argument("--N", dest="n", type=int, help="number of segments")
    p.add_argument("--h", type=float, help="target segment length")
    p.add_argument("--h-over-lambda", dest="h_over_lambda", type=float, help="target segment length in wavelengths")
    p.add_argument("--k", type=float, help="wavenumber (0 for static kernels)")
    p.add_argument("--freq", type=float, help="frequency in Hz (k = 2 pi f / c)")
    p.add_argument("--eta", type=float, help="impedance in ohms")
    p.add_argument("--kernel", help="one of " + ", ".join(FAMILIES))
    p.add_argument("--alpha", help="cutoff, absolute or relative like 3k")
    p.add_argument("--op", help="S, N or calderon")
    p.add_argument("--ordering", choices=("response", "overlap"))
    p.add_argument("--spacing", choices=("arclength", "chord"))
    p.add_argument("--out", help="output path prefix")
    p.add_argument("--threads", type=int, help="assembly worker threads (default $EFIE2D_THREADS or 1)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efie2d", description="Filtered 2D EFIE operators and their spectra.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="{spectrum,kernel-trace,assemble,solve,verify}")

    _common(sub.add_parser("spectrum", help="LB-ordered mode responses, filtered and unfiltered"))
    kt = sub.add_parser("kernel-trace", help="kernel values on a log-spaced r grid")
    _common(kt)
    kt.add_argument("--rmin", type=float, default=1e-3)
    kt.add_argument("--rmax", type=float, default=10.0)
    kt.add_argument("--points", type=int, default=61)
    asm = sub.add_parser("assemble", help="export an operator matrix")
    _common(asm)
    asm.add_argument("--format", choices=("binary", "csv"), default="binary")
    sv = sub.add_parser("solve", help="plane-wave scattering solve")
    _common(sv)
    sv.add_argument("--polarization", choices=("TM", "TE", "tm", "te"), default="TM")
    sv.add_argument("--angle", type=float, default=0.0, help="incidence direction in degrees")
    ver = sub.add_parser("verify", help="oracle agreement suite")
    ver.add_argument("level", nargs="?", choices=("quick", "full"), default="quick")
    ver.add_argument("--inject", help=argparse.SUPPRESS)
    ver.add_argument("--out", help="agreement table path (JSON)")
    sub.add_parser("quad-selftest")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command == "verify":
            code = cmd_verify(args.level, args.inject, args.out)
        elif args.command == "quad-selftest":
            code = cmd_quad_selftest()
        else:
            cfg = build_config(args)
            if args.command == "spectrum":
                code = cmd_spectrum(cfg)
            elif args.command == "kernel-trace":
                code = cmd_kernel_trace(cfg, args.rmin, args.rmax, args.points)
            elif args.command == "assemble":
                code = cmd_assemble(cfg, args.format)
            else:
                code = cmd_solve(cfg, args.polarization, args.angle)
    except (InvalidArgument, Unsupported) as exc:
        print(f"efie2d: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, NumericDomainError, AccuracyFailure, np.linalg.LinAlgError) as exc:
        print(f"efie2d: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"done in {time.perf_counter() - start:.1f} s", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
