"""The ``semgate`` command-line interface."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import distill as distill_mod
from . import evalcli, metrics, secrecy
from .backends.client import ChatClient
from .backends.corpus import make_corpus
from .core.config import load_config
from .core.store import SessionStore
from .errors import SemgateError
from .listgen import ListGenConfig, generate_lists


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
@click.option("--log-content", is_flag=True,
              help="Opt in to logging message content (redacted by default).")
@click.pass_context
def main(ctx, verbose, log_content):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj["log_content"] = log_content


def _client(ctx) -> ChatClient:
    return ChatClient(log_content=ctx.obj.get("log_content", False))


@main.command("listgen")
@click.option("--count", default=1, show_default=True, type=int)
@click.option("--n-min", default=3, show_default=True, type=int)
@click.option("--n-max", default=10, show_default=True, type=int)
@click.option("--v-min", default=0.0, show_default=True, type=float)
@click.option("--v-max", default=1000.0, show_default=True, type=float)
@click.option("--seed", default=None, type=int)
@click.option("--decimals", default=0, show_default=True, type=int)
def listgen_cmd(count, n_min, n_max, v_min, v_max, seed, decimals):
    """Emit random number lists as JSONL lines {"id", "values"}."""
    cfg = ListGenConfig(
        n_min=n_min, n_max=n_max, v_min=v_min, v_max=v_max, seed=seed, decimals=decimals
    )
    for i, lst in enumerate(generate_lists(cfg, count)):
        click.echo(json.dumps({"id": f"list-{i:05d}", "values": list(lst.values)}))


@main.command("corpus")
@click.option("--count", default=100, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write JSONL here instead of stdout.")
def corpus_cmd(count, seed, out):
    """Emit the synthetic templated math corpus used for offline mock runs."""
    lines = [
        json.dumps({"id": it.id, "question": it.question, "label": it.label})
        for it in make_corpus(count, seed)
    ]
    if out:
        Path(out).write_text("\n".join(lines) + "\n", "utf-8")
        click.echo(f"wrote {count} items to {out}")
    else:
        for line in lines:
            click.echo(line)


@main.command("distill")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--source", type=click.Choice(["synthetic", "dataset"]), required=True)
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--question-field", default="question", show_default=True)
@click.option("--label-field", default="label", show_default=True)
@click.option("--count", default=100, show_default=True, type=int,
              help="Synthetic item count.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--parallelism", default=4, show_default=True, type=int)
@click.option("--limit", default=None, type=int,
              help="Process at most this many new items (resume later).")
@click.pass_context
def distill_cmd(ctx, config_path, source, dataset, question_field, label_field,
                count, out_dir, seed, parallelism, limit):
    """Run the semantic-distillation pipeline and emit training files."""
    config = load_config(config_path)
    if source == "synthetic":
        src = distill_mod.SyntheticSource(
            listgen=ListGenConfig(
                n_min=config.listgen.n_min, n_max=config.listgen.n_max,
                v_min=config.listgen.v_min, v_max=config.listgen.v_max,
                seed=seed, decimals=config.listgen.decimals,
            ),
            count=count,
        )
    else:
        if not dataset:
            raise click.UsageError("--dataset is required with --source dataset")
        src = distill_mod.DatasetSource(
            path=dataset, question_field=question_field, label_field=label_field
        )
    job = distill_mod.DistillJob(
        source=src, cloud=config.endpoint("cloud"), prompts=config.prompts,
        out_dir=out_dir, seed=seed, parallelism=parallelism,
    )
    try:
        summary = distill_mod.run_job(job, _client(ctx), limit=limit)
    except SemgateError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(summary.to_dict()))


@main.command("eval")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help='JSONL with {"id","candidate","reference"} lines.')
@click.option("--mode", type=click.Choice(["experience", "privacy", "utility"]),
              required=True)
@click.option("--task", type=click.Choice(["math", "nli"]), default="math",
              show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
def eval_cmd(pairs_path, mode, task, out_path):
    """Score a pre-built pairs file (no model calls)."""
    pairs = []
    with open(pairs_path, encoding="utf-8") as f:
        for i, line in enumerate(l for l in f if l.strip()):
            raw = json.loads(line)
            pairs.append((raw.get("id", f"p{i:05d}"), raw["candidate"], raw["reference"]))
    if mode == "utility":
        task_name = {"math": "math_numeric", "nli": "nli_label"}[task]
        report = metrics.accuracy(
            [c for _, c, _ in pairs], [r for _, _, r in pairs], task_name
        )
        data = {"mode": mode, "task": task, **report.to_dict()}
    else:
        data = metrics.score_pairs(pairs, mode=mode).to_dict()
    if out_path:
        evalcli.write_report(data, out_path)
        click.echo(f"wrote report to {out_path}")
    else:
        click.echo(json.dumps(data, sort_keys=True, indent=2))


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(list(evalcli.MODES)), required=True)
@click.option("--task", type=click.Choice(["math", "nli"]), default="math",
              show_default=True)
@click.option("--question-field", default="question", show_default=True)
@click.option("--label-field", default="label", show_default=True)
@click.option("--parallelism", default=4, show_default=True, type=int)
@click.option("--name", default=None, help="Method name recorded in the report.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.pass_context
def run_cmd(ctx, config_path, dataset, mode, task, question_field, label_field,
            parallelism, name, out_path):
    """Run an end-to-end experiment over a dataset through the gateway pipeline."""
    config = load_config(config_path)
    try:
        result = evalcli.run_experiment(
            config, dataset, mode, task=task,
            question_field=question_field, label_field=label_field,
            parallelism=parallelism, client=_client(ctx),
        )
    except SemgateError as exc:
        raise click.ClickException(str(exc))
    data = result.to_dict()
    if name:
        data["name"] = name
    if out_path:
        evalcli.write_report(data, out_path)
        click.echo(f"wrote report to {out_path}")
    click.echo(json.dumps(
        {k: v for k, v in data.items() if k != "similarity"}
        | ({"aggregates": data["similarity"]["aggregates"]} if "similarity" in data else {}),
        sort_keys=True, indent=2,
    ))


@main.command("judge")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True),
              help='JSONL with {"id","t_o","t_hat_o"} lines.')
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False))
@click.pass_context
def judge_cmd(ctx, config_path, pairs_path, out_path):
    """Score transformation pairs with the configured judge model."""
    config = load_config(config_path)
    pairs = []
    with open(pairs_path, encoding="utf-8") as f:
        for i, line in enumerate(l for l in f if l.strip()):
            raw = json.loads(line)
            pairs.append((raw.get("id", f"p{i:05d}"), raw["t_o"], raw["t_hat_o"]))
    try:
        report = evalcli.judge(pairs, config.endpoint("judge"), config, client=_client(ctx))
    except SemgateError as exc:
        raise click.ClickException(str(exc))
    data = report.to_dict()
    if out_path:
        evalcli.write_report(data, out_path)
        click.echo(f"wrote report to {out_path}")
    else:
        click.echo(json.dumps(data, sort_keys=True, indent=2))


@main.command("purge")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--older-than", default=None,
              help="Remove sessions older than this ('7d', '24h', '30m', '0').")
@click.option("--all", "purge_all", is_flag=True, help="Remove every session.")
def purge_cmd(config_path, older_than, purge_all):
    """Remove stored sessions and compact the store file."""
    if not purge_all and older_than is None:
        raise click.UsageError("pass --all or --older-than")
    config = load_config(config_path)
    store = SessionStore(config.store_path)
    ms = None if purge_all else evalcli.parse_duration_ms(older_than)
    removed = evalcli.purge_sessions(store, older_than_ms=ms)
    click.echo(f"removed {removed} session(s)")


@main.command("secrecy")
@click.option("--system", "system_path", default=None, type=click.Path(exists=True),
              help="JSON system description (see README for the schema).")
@click.option("--make-latin", default=None, type=int,
              help="Instead of loading, build a uniform Latin-square system of this size.")
@click.option("--seed", default=None, type=int)
@click.option("--exact/--no-exact", default=True, show_default=True)
@click.option("--trials", default=0, show_default=True, type=int,
              help="Add a Monte-Carlo estimate with this many draws.")
@click.option("--out", "out_path", default=None, type=click.Path(dir_okay=False),
              help="With --make-latin: also write the system JSON here.")
def secrecy_cmd(system_path, make_latin, seed, exact, trials, out_path):
    """Analyze a finite secrecy system: posteriors and mutual information."""
    if (system_path is None) == (make_latin is None):
        raise click.UsageError("pass exactly one of --system or --make-latin")
    if make_latin is not None:
        system = secrecy.latin_square_system(make_latin, seed=seed)
        if out_path:
            Path(out_path).write_text(
                json.dumps(system.to_dict(), indent=2) + "\n", "utf-8"
            )
            click.echo(f"wrote system to {out_path}")
    else:
        system = secrecy.SecrecySystem.load(system_path)
    data = secrecy.report(system, trials=trials if trials > 0 else 0, seed=seed)
    if not exact:
        data.pop("max_posterior_deviation", None)
        data.pop("mi_message_ciphertext_bits", None)
        data.pop("mi_message_ciphertext_payload_bits", None)
    click.echo(json.dumps(data, sort_keys=True, indent=2))


@main.command("report")
@click.option("--inputs", required=True, multiple=True, type=click.Path(exists=True))
def report_cmd(inputs):
    """Tabulate several report JSONs (including ingested baselines) side by side."""
    click.echo(evalcli.merge_reports(list(inputs)))


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--listen", default=None, help="Override gateway.listen_addr.")
def serve_cmd(config_path, listen):
    """Run the gateway HTTP service."""
    from .gateway import serve

    config = load_config(config_path)
    try:
        serve(config, listen_addr=listen)
    except SemgateError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    sys.exit(main())
