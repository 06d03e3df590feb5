"""Command-line interface: parse, check, run, transform, universal, amplify,
audit, density and render."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, fileio
from .core import BOUNDARIES, MODES, TrajectoryBlock, random_row, report_lines, run
from .errors import SparseCAError
from .interp import measure_costs, rule_of
from .lang.program import RuleProgram, parse, validate
from .programs import SOURCES, builtin_program

TRANSFORM_NAMES = ("sparsify", "g1", "g2", "identity")


# ----------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    program: str | None = None
    builtin: str | None = None
    transform: list = field(default_factory=list)  # ["sparsify:4", ...], applied in order
    init: str | None = None
    init_file: str | None = None
    random: str | None = None  # "WIDTH:DENSITY"
    raw: bool = False
    steps: int = 0
    boundary: str = "blank"
    mode: str = "det"
    blank_prob: float = 0.0
    seed: int = 0
    threads: int = 1
    out: str | None = None
    render: str | None = None

    @classmethod
    def load(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = set(cls.__dataclass_fields__)
        bad = sorted(set(data) - known)
        if bad:
            raise SparseCAError(f"unknown manifest keys: {', '.join(bad)}")
        return cls(**data)

    def dump(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def load_program(path: str | None, builtin: str | None) -> RuleProgram:
    if builtin:
        return builtin_program(builtin)
    if not path:
        raise SparseCAError("give a program file or --builtin")
    return parse(Path(path).read_text(encoding="utf-8"), name=Path(path).stem)


def parse_transform(spec: str) -> tuple[str, int]:
    name, _, n = spec.partition(":")
    if name not in TRANSFORM_NAMES:
        raise SparseCAError(f"unknown transform {name!r}; choose from {', '.join(TRANSFORM_NAMES)}")
    try:
        level = int(n) if n else 1
    except ValueError:
        raise SparseCAError(f"bad transform level in {spec!r}") from None
    if level < 1:
        raise SparseCAError("transform levels start at 1")
    return name, level


def apply_chain(p: RuleProgram, chain: list) -> tuple[RuleProgram, list]:
    """Apply transforms in order; returns the final host and per-level descriptors."""
    from .transforms import g1, g2, sparse_descriptor, sparsify_with_map
    descs = []
    for spec in chain:
        name, n = parse_transform(spec)
        if name == "identity":
            continue
        host, mapping = sparsify_with_map(n, p)
        if name == "g1":
            host = g1(n, host)
        elif name == "g2":
            host = g2(n, host)
        descs.append(sparse_descriptor(n, p, host, mapping))
        p = host
    return p, descs


def parse_init(text: str, K: int) -> np.ndarray:
    text = text.strip()
    if "," in text or " " in text:
        vals = [int(v, 0) for v in text.replace(",", " ").split()]
    elif K == 1:
        vals = [int(ch) for ch in text]
    else:
        vals = [int(text, 0)]
    if any(v < 0 or v >= (1 << K) for v in vals):
        raise SparseCAError(f"initial states must fit in {K} bits")
    return np.array(vals, dtype=np.uint64 if K <= 64 else object)


def initial_row(m: RunManifest, base: RuleProgram) -> np.ndarray:
    if m.init is not None:
        return parse_init(m.init, base.K)
    if m.init_file:
        return parse_init(Path(m.init_file).read_text(encoding="utf-8"), base.K)
    if m.random:
        width, _, dens = m.random.partition(":")
        rng = np.random.default_rng(m.seed)
        return random_row(rng, int(width), base.K, float(dens or 0.5))
    raise SparseCAError("give --init, --init-file or --random")


def execute(m: RunManifest) -> tuple[TrajectoryBlock, RuleProgram]:
    if m.boundary not in BOUNDARIES:
        raise SparseCAError(f"unknown boundary {m.boundary!r}")
    if m.mode not in MODES:
        raise SparseCAError(f"unknown mode {m.mode!r}")
    base = load_program(m.program, m.builtin)
    errs = validate(base)
    if errs:
        raise errs[0]
    host, descs = apply_chain(base, m.transform)
    cells = initial_row(m, host if m.raw else base)
    if not m.raw:
        for d in reversed(descs):
            cells = d.encode_cells(cells)
    rule = rule_of(host)
    blk = run(rule, cells, m.steps, mode=m.mode, blank_prob=m.blank_prob, seed=m.seed,
              boundary=m.boundary, threads=m.threads, layout_name=host.name or "program")
    return blk, host


# ----------------------------------------------------------------- commands

def _emit(text: str, out: str | None) -> None:
    if out:
        fileio.write_atomic(out, text)
    else:
        sys.stdout.write(text)


def cmd_parse(a) -> int:
    p = load_program(a.file, a.builtin)
    _emit(p.text, a.out)
    return 0


def cmd_check(a) -> int:
    p = load_program(a.file, a.builtin)
    errs = validate(p)
    for e in errs:
        print(f"error: {e}", file=sys.stderr)
    if errs:
        return 1
    lines = [f"ok K={p.K}"]
    lines += [f"field {f.name} offset={f.offset} width={f.width}" for f in p.layout.fields]
    if a.costs:
        mode = "exhaustive" if p.K <= 5 else "bound"
        prof = measure_costs(p, mode)
        lines.append(f"costs time={prof.time_steps} space={prof.space_bits} mode={prof.mode}")
    print("\n".join(lines))
    return 0


def _manifest_from(a) -> RunManifest:
    m = RunManifest.load(a.manifest) if a.manifest else RunManifest()
    for key in ("program", "builtin", "init", "init_file", "random", "out", "render"):
        v = getattr(a, key)
        if v is not None:
            setattr(m, key, v)
    if a.transform:
        m.transform = [t for spec in a.transform for t in spec.split(",") if t]
    for key in ("steps", "boundary", "mode", "blank_prob", "seed", "threads"):
        v = getattr(a, key)
        if v is not None:
            setattr(m, key, v)
    if a.raw:
        m.raw = True
    return m


def cmd_run(a) -> int:
    m = _manifest_from(a)
    blk, host = execute(m)
    _emit(fileio.trajectory_text(blk.rows, host.K, blk.layout_name), m.out)
    if m.render:
        fileio.write_atomic(m.render, fileio.pbm_text(blk.rows))
    return 0


def cmd_transform(a) -> int:
    p = load_program(a.file, a.builtin)
    host, _ = apply_chain(p, [f"{a.name}:{a.n}"])
    _emit(host.text, a.out)
    return 0


def cmd_universal(a) -> int:
    from .universal import UniversalParams, min_dimensions, target_profile, universal_program
    p = load_program(a.target, a.builtin)
    prof = target_profile(p)
    if a.auto_dims or a.Q is None or a.U is None:
        Q, U = min_dimensions(p, prof)
    else:
        Q, U = a.Q, a.U
    prog = universal_program(UniversalParams(Q, U, p), prof)
    print(f"# Q={Q} U={U} target K={p.K} time={prof.time_steps} space={prof.space_bits}",
          file=sys.stderr)
    _emit(prog.text, a.out)
    return 0


def cmd_amplify(a) -> int:
    from .amplifier import asymptotic_advisory, build_amplifier
    from .transforms import G1, G2, IDENTITY, SPARSE
    G = {"sparse": SPARSE, "g1": G1, "g2": G2, "identity": IDENTITY}[a.transform]
    consts = tuple(int(c) for c in a.constants.split(",")) if a.constants else None
    spec = build_amplifier(G, a.horizon, consts)
    table = spec.certificate_table()
    if a.out_dir:
        d = Path(a.out_dir)
        d.mkdir(parents=True, exist_ok=True)
        for n in range(spec.horizon + 1):
            fileio.write_atomic(d / f"p{n}.ca", spec.program(n).text)
        fileio.write_atomic(d / "certificate.txt", table)
    print(f"# constants c1..c4 = {','.join(str(c) for c in spec.constants)}")
    sys.stdout.write(table)
    print(f"# {asymptotic_advisory(spec)}")
    return 0


def _block_from_file(path, boundary) -> tuple[TrajectoryBlock, int]:
    rows, K, layout = fileio.read_trajectory(path)
    return TrajectoryBlock(rows, boundary=boundary, layout_name=layout), K


def _descriptor_for(a):
    """(host rule, target rule, descriptor, level n) from --builtin/--program + chain/universal."""
    base = load_program(a.program, a.builtin)
    if a.universal:
        from .universal import UniversalParams, universal_descriptor, universal_program, \
            universal_rule
        Q, U = (int(v) for v in a.universal.split(":"))
        params = UniversalParams(Q, U, base)
        prog = universal_program(params)
        return universal_rule(prog, base), rule_of(base), universal_descriptor(params, prog), 0
    chain = [t for spec in (a.transform or []) for t in spec.split(",") if t]
    if not chain:
        raise SparseCAError("audits need --transform or --universal")
    host, descs = apply_chain(base, chain)
    from .transforms import sparse_rule
    n = parse_transform(chain[-1])[1]
    if len(descs) == 1 and parse_transform(chain[0])[0] == "sparsify":
        hrule = sparse_rule(n, base, host)
    else:
        hrule = rule_of(host)
    from .sim import compose_sim
    d = descs[-1]
    for inner in reversed(descs[:-1]):
        d = compose_sim(d, inner)
    return hrule, rule_of(base), d, n


def cmd_audit(a) -> int:
    from . import sim
    if a.kind == "overlap" and a.anchors:
        pts = []
        for ln in Path(a.anchors).read_text(encoding="utf-8").splitlines():
            if ln.strip() and not ln.startswith("#"):
                i, t = ln.split()[:2]
                pts.append((int(i), int(t)))
        Q, U = (int(v) for v in a.dims.split(":"))
        d = sim.SimulationDescriptor(Q, U, (0, 0))
        v = sim.audit_overlap(d, pts, a.overlap_mode)
        print("\n".join(report_lines("overlap", v, len(pts))))
        return 1 if v else 0
    if not a.trajectory:
        raise SparseCAError("audit needs --trajectory (or --anchors for overlap)")
    blk, _ = _block_from_file(a.trajectory, a.boundary)
    hrule, trule, d, n = _descriptor_for(a)
    if a.kind == "sparsity":
        rep = analysis.sparsity_audit(blk, n or 1, hrule)
        print("\n".join(rep.lines()))
        return 1 if rep.violations else 0
    anchors = sim.find_macrocells(d, blk)
    if a.kind == "rigidity":
        v = sim.audit_rigidity(d, hrule, trule, blk, a.variant, anchors)
        checked = sim.audit_rigidity.last_checked
    elif a.kind == "connecting":
        v = sim.audit_connecting(d, hrule, trule, blk, anchors)
        checked = sim.audit_connecting.last_checked
    elif a.kind == "overlap":
        mode = a.overlap_mode
        v = sim.audit_overlap(d, anchors, mode)
        checked = len(anchors)
    else:
        v = sim.audit_parents([d], blk, d.Q, d.U)
        checked = sim.audit_parents.last_checked
    print("\n".join(report_lines(a.kind, v, checked)))
    return 1 if v else 0


def cmd_density(a) -> int:
    blk, _ = _block_from_file(a.trajectory, a.boundary)
    if a.column is not None:
        target = analysis.Column(a.column)
    elif a.row is not None:
        target = analysis.Row(a.row)
    elif a.line:
        i, k, *off = (int(v) for v in a.line.split(":"))
        target = analysis.Line(i, k, off[0] if off else 0)
    else:
        raise SparseCAError("give --column, --row or --line")
    rep = analysis.blank_density(blk, target)
    if a.csv:
        fileio.write_atomic(a.csv, rep.csv_text())
    print(rep.table())
    return 0


def cmd_render(a) -> int:
    rows, K, layout = fileio.read_trajectory(a.trajectory)
    if a.field:
        p = load_program(a.program, a.builtin)
        chain = [t for spec in (a.transform or []) for t in spec.split(",") if t]
        p, _ = apply_chain(p, chain)
        if p.K != K:
            raise SparseCAError(f"program has K={p.K}, trajectory has K={K}")
        text = fileio.pgm_text(rows, p.layout, a.field)
    else:
        text = fileio.pbm_text(rows)
    _emit(text, a.out)
    return 0


# ------------------------------------------------------------------- parser

def _common_program(p):
    p.add_argument("--builtin", choices=sorted(SOURCES), help="use a shipped rule program")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparseca", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("parse", help="print the canonical text of a program")
    p.add_argument("file", nargs="?")
    _common_program(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("check", help="validate a program and show its layout")
    p.add_argument("file", nargs="?")
    _common_program(p)
    p.add_argument("--costs", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="simulate and write a trajectory file")
    p.add_argument("--manifest")
    p.add_argument("--program")
    _common_program(p)
    p.add_argument("--transform", action="append", help="e.g. sparsify:4 (repeat or comma-join)")
    p.add_argument("--init")
    p.add_argument("--init-file")
    p.add_argument("--random", help="WIDTH:DENSITY seeded random row")
    p.add_argument("--raw", action="store_true", help="initial row is in host states")
    p.add_argument("--steps", type=int)
    p.add_argument("--boundary", choices=BOUNDARIES)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--blank-prob", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--render")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("transform", help="apply a program transformation")
    p.add_argument("name", choices=TRANSFORM_NAMES)
    p.add_argument("file", nargs="?")
    p.add_argument("--n", type=int, default=1)
    _common_program(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("universal", help="emit a universal simulator program")
    p.add_argument("--target")
    _common_program(p)
    p.add_argument("--auto-dims", action="store_true")
    p.add_argument("--Q", type=int)
    p.add_argument("--U", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_universal)

    p = sub.add_parser("amplify", help="build an amplifier and its certificate")
    p.add_argument("--transform", default="sparse", choices=("sparse", "g1", "g2", "identity"))
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--constants", help="c1,c2,c3,c4 (skip the search)")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_amplify)

    p = sub.add_parser("audit", help="run a simulation audit")
    p.add_argument("kind", choices=("rigidity", "connecting", "overlap", "parents", "sparsity"))
    p.add_argument("--trajectory")
    p.add_argument("--program")
    _common_program(p)
    p.add_argument("--transform", action="append")
    p.add_argument("--universal", help="Q:U of a universal simulator of the program")
    p.add_argument("--variant", default="weak", choices=("weak", "rigid", "strong"))
    p.add_argument("--boundary", default="blank", choices=BOUNDARIES)
    p.add_argument("--anchors", help="file of 'i t' lines (overlap only)")
    p.add_argument("--dims", default="4:24", help="Q:U for --anchors")
    p.add_argument("--overlap-mode", default="universal", choices=("universal", "composed"))
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("density", help="blank density along a column, row or line")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--boundary", default="blank", choices=BOUNDARIES)
    p.add_argument("--column", type=int)
    p.add_argument("--row", type=int)
    p.add_argument("--line", help="I:K[:OFFSET]")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("render", help="render a trajectory as PBM (or PGM of a field)")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--field")
    p.add_argument("--program")
    _common_program(p)
    p.add_argument("--transform", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a, extra = ap.parse_known_args(argv)
    # a trailing file after options (``transform sparsify --n 4 xor.ca``)
    if extra and len(extra) == 1 and not extra[0].startswith("-") and \
            getattr(a, "file", "") is None:
        a.file = extra[0]
    elif extra:
        ap.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return a.func(a)
    except (SparseCAError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
