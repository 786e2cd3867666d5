"""Command-line front end: ``cryptovm {keygen,encrypt,decrypt,assemble,run,stats,serve}``."""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__, keyservice, memfile
from .alu import decrypt_int
from .emulator import END, HALTED, STEP_LIMIT, DataMemory, EmulatorError, MachineState, run
from .gates import CostTable, GateDag, SimBackend, SimKey
from .isa import AsmError, assemble, disassemble
from .sched import analyze, parse_workers

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_STEP_LIMIT = 2

log = logging.getLogger("cryptovm")


def _read_program(path: str, width: int | None, regs: int):
    return assemble(Path(path).read_text(), word_size=width, regs=regs)


def _costs(path: str | None) -> CostTable:
    return CostTable.load(path) if path else CostTable.default()


def cmd_keygen(args: argparse.Namespace) -> int:
    keyservice.save_key(SimKey(), args.output)
    return EXIT_OK


def cmd_encrypt(args: argparse.Namespace) -> int:
    values = [int(v, 0) for v in args.values]
    if args.input:
        values += [int(tok, 0) for tok in Path(args.input).read_text().split()]
    mask = (1 << args.width) - 1
    # Negative inputs are taken as two's complement.
    values = [v & mask if -(1 << (args.width - 1)) <= v < 0 else v for v in values]
    keyservice.encrypt_file(values, args.width, args.output)
    return EXIT_OK


def cmd_decrypt(args: argparse.Namespace) -> int:
    width, values = keyservice.decrypt_file(args.input)
    if args.signed:
        top = 1 << (width - 1)
        values = [v - (top << 1) if v & top else v for v in values]
    print(json.dumps({"width": width, "values": values}) if args.json else "\n".join(map(str, values)))
    return EXIT_OK


def cmd_assemble(args: argparse.Namespace) -> int:
    program = _read_program(args.input, args.width, args.regs)
    text = disassemble(program)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    workers = parse_workers(args.workers)
    program = _read_program(args.program, args.width, args.regs)
    width = program.word_size
    key = keyservice.load_key(args.key) if args.key else SimKey()
    backend = SimBackend(costs=_costs(args.cost_table), key=key, staged=not args.dataflow)

    memory = None
    if args.mem:
        source = args.mem
        if args.mem_mode == "file" and args.out:
            shutil.copyfile(args.mem, args.out)
            source = args.out
        memory = DataMemory.from_file(backend, width, source, args.mem_mode)

    if args.oracle == "local":
        oracle = keyservice.LocalOracle(backend)
    else:
        if not args.key:
            raise ValueError("a remote oracle needs --key matching the key owner's key")
        oracle = keyservice.RemoteOracle(backend, args.oracle)

    state = MachineState(backend, width=width, regs=args.regs, memory=memory, oracle=oracle)
    try:
        run(state, program, max_steps=args.max_steps)
    finally:
        if isinstance(oracle, keyservice.RemoteOracle):
            oracle.close()

    if args.out and state.status in (HALTED, END, STEP_LIMIT):
        state.memory.save(args.out)

    stats = {
        "status": state.status,
        "error": state.error,
        "pc": state.pc,
        "instructions": state.stats["instructions"],
        "branch_queries": state.stats["branch_queries"],
        "ops": {k[3:]: v for k, v in sorted(state.stats.items()) if k.startswith("op:")},
        "schedule": None,
    }
    if any(n.is_gate for n in backend.dag):
        stats["schedule"] = analyze(backend.dag, workers).to_json()
    if args.stats:
        Path(args.stats).write_text(json.dumps(stats, indent=2) + "\n")
    if args.trace:
        Path(args.trace).write_text(json.dumps(backend.dag.to_json()))
    if args.show_regs:
        # Decryption here stands in for the user reading results back.
        for r in range(args.regs):
            print(f"R{r} = {decrypt_int(state.reg(r), signed=args.signed)}")

    print(f"status: {state.status}, instructions: {stats['instructions']}, branch queries: {stats['branch_queries']}")
    if state.status in (HALTED, END):
        return EXIT_OK
    if state.status == STEP_LIMIT:
        print(f"error: step limit of {args.max_steps} reached", file=sys.stderr)
        return EXIT_STEP_LIMIT
    print(f"error: {state.error}", file=sys.stderr)
    return EXIT_ERROR


def cmd_stats(args: argparse.Namespace) -> int:
    dag = GateDag.from_json(json.loads(Path(args.trace).read_text()))
    costs = CostTable.load(args.cost_table) if args.cost_table else None
    report = analyze(dag, parse_workers(args.workers), costs)
    text = json.dumps(report.to_json(), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    key = keyservice.load_key(args.key)
    policy = keyservice.follow_branch if args.user_pc else None
    server = keyservice.serve(args.endpoint, key, policy)
    print(f"branch server listening on {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cryptovm", description="Emulate a small ISA over encrypted bits.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("keygen", help="create a simulation key file")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_keygen)

    s = sub.add_parser("encrypt", help="write a data-memory image")
    s.add_argument("values", nargs="*", help="word values (decimal or 0x hex)")
    s.add_argument("-i", "--input", help="text file of whitespace-separated values")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--width", type=int, default=32, choices=(16, 32))
    s.set_defaults(func=cmd_encrypt)

    s = sub.add_parser("decrypt", help="read back a data-memory image")
    s.add_argument("input")
    s.add_argument("--signed", action="store_true")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_decrypt)

    s = sub.add_parser("assemble", help="check a program and print its canonical form")
    s.add_argument("input")
    s.add_argument("-o", "--output")
    s.add_argument("--width", type=int, choices=(16, 32))
    s.add_argument("--regs", type=int, default=16)
    s.set_defaults(func=cmd_assemble)

    s = sub.add_parser("run", help="execute a program")
    s.add_argument("program")
    s.add_argument("--mem", help="input data-memory image")
    s.add_argument("--out", help="where to write the final data memory")
    s.add_argument("--mem-mode", choices=("buffer", "file"), default="buffer")
    s.add_argument("--width", type=int, choices=(16, 32))
    s.add_argument("--regs", type=int, default=16)
    s.add_argument("--cost-table", help="gate latency overrides, one 'KIND = ms' per line")
    s.add_argument("--workers", default="1,48", help="worker counts to model, e.g. 1,4,inf")
    s.add_argument("--max-steps", type=int, default=1_000_000)
    s.add_argument("--oracle", default="local", help="'local' or host:port of a branch server")
    s.add_argument("--key", help="key file (required with a remote oracle)")
    s.add_argument("--stats", help="write run statistics as JSON")
    s.add_argument("--trace", help="write the gate DAG as JSON")
    s.add_argument("--dataflow", action="store_true", help="no stage barriers between parallel regions")
    s.add_argument("--show-regs", action="store_true", help="decrypt and print registers at exit")
    s.add_argument("--signed", action="store_true", help="print registers as signed values")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("stats", help="schedule a saved gate DAG")
    s.add_argument("trace")
    s.add_argument("--workers", default="1,48")
    s.add_argument("--cost-table")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("serve", help="run the key owner's branch server")
    s.add_argument("endpoint", help="host:port to listen on")
    s.add_argument("--key", required=True)
    s.add_argument("--user-pc", action="store_true", help="reply with next_pc as well as the outcome")
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (AsmError, EmulatorError, memfile.MemFileError, memfile.ValueRangeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
