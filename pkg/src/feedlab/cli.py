"""Command-line entry point: ``feedlab screen|simulate|analyze|power|serve|report``."""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .errors import FeedlabError

ANALYZE_PRINT = ("exposure_change", "infeed_effects", "post_effects", "randomization_inference", "fdr")


def _experiment(value):
    from .domain import Experiment
    if value is None:
        return None
    for e in Experiment:
        if e.value.lower() == value.lower():
            return e
    raise click.BadParameter(f"expected reduce or increase, got {value!r}")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def cli(verbose):
    """Feed reranking field-experiment toolkit."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


@cli.command()
@click.option("--posts", "posts_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSONL file, one post object per line.")
@click.option("--json", "as_json", is_flag=True, help="Print a JSON object instead of the verdict line.")
def screen(posts_path, as_json):
    """Political fraction of a feed sample and the enrollment verdict."""
    from .domain import Post
    from .scoring.backends import LexiconOracle
    from .scoring.scorer import political_fraction, qualifies

    with open(posts_path, encoding="utf-8") as fh:
        posts = [Post.from_dict(json.loads(line)) for line in fh if line.strip()]
    frac = political_fraction(posts, LexiconOracle())
    ok = qualifies(frac)
    if as_json:
        click.echo(json.dumps({"posts": len(posts), "political_fraction": frac, "qualified": ok}))
    else:
        click.echo(f"qualified: {'true' if ok else 'false'} ({frac:.3f})")


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="Simulation TOML.")
@click.option("--seed", type=int, help="Master seed (overrides the config).")
@click.option("--participants", type=int, help="Number of screened participants (overrides the config).")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Bundle directory.")
@click.option("--stop-after-day", type=int, help="Halt after this study day; rerun to resume.")
def simulate(config_path, seed, participants, out, stop_after_day):
    """Run a seeded study simulation and write its bundle."""
    from .sim import SimConfig, run_study

    config = SimConfig.from_toml(config_path) if config_path else SimConfig()
    overrides = {}
    if seed is not None:
        overrides["master_seed"] = seed
    if participants is not None:
        overrides["n_participants"] = participants
    if overrides:
        config = config.replace(**overrides)
    bundle = run_study(config, out=out, stop_after_day=stop_after_day)
    enrolled = len(bundle.server.participants)
    click.echo(json.dumps({"out": str(Path(out)), "seed": config.master_seed, "enrolled": enrolled,
                           "days_done": bundle.days_done, "complete": bundle.complete}))


@cli.command()
@click.option("--bundle", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--experiment", help="reduce or increase; both when omitted.")
@click.option("--draws", type=int, default=None, help="Randomization-inference draws.")
@click.option("--out", type=click.Path(file_okay=False), help="Where to write CSV tables.")
def analyze(bundle, experiment, draws, out):
    """Regression tables, randomization-inference tests and FDR-adjusted p-values."""
    from .analysis import RI_DRAWS, write_tables

    exp = _experiment(experiment)
    suffix = f"-{exp.value.lower()}" if exp is not None else ""
    target = Path(out) if out else Path(bundle) / f"analysis{suffix}"
    tables = write_tables(bundle, target, exp, draws if draws is not None else RI_DRAWS)
    for name in ANALYZE_PRINT:
        click.echo(f"## {name}\n")
        click.echo(tables[name].to_markdown())
    click.echo(f"tables written to {target}")


@cli.command()
@click.option("--effect", type=float, required=True, help="Planted treatment effect (thermometer degrees).")
@click.option("--n", "n", type=int, required=True, help="Participants across both arms.")
@click.option("--sims", type=int, default=1000, show_default=True)
@click.option("--model", type=click.Choice(["lmm", "ols"]), default="lmm", show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def power(effect, n, sims, model, alpha, seed):
    """Simulation-based power at pilot-like variances."""
    from .stats import power_simulation

    res = power_simulation(effect, n, n_sims=sims, alpha=alpha, seed=seed, model=model)
    click.echo(json.dumps(res.to_dict()))


@cli.command()
@click.option("--addr", default="127.0.0.1:8000", show_default=True, help="host:port to bind.")
@click.option("--store", "store_dir", type=click.Path(file_okay=False), help="Persistent store (or FEEDLAB_STORE).")
@click.option("--token", envvar="FEEDLAB_TOKEN", help="Static bearer token required on every request.")
@click.option("--reports", type=click.Path(file_okay=False), help="Directory of finished run bundles.")
def serve(addr, store_dir, token, reports):
    """Serve the rerank protocol over HTTP."""
    import uvicorn

    from .service import create_app, server_from_env

    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise click.BadParameter(f"expected host:port, got {addr!r}")
    app = create_app(server_from_env(store_dir), token=token, reports=Path(reports) if reports else None)
    uvicorn.run(app, host=host, port=int(port), log_level="info")


@cli.command()
@click.option("--bundle", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), help="Defaults to <bundle>/report.")
@click.option("--no-plots", is_flag=True)
def report(bundle, fmt, out, no_plots):
    """Emit every table plus the polarization and emotion plots."""
    from .report import write_report

    for p in write_report(bundle, out, fmt, plots=not no_plots):
        click.echo(str(p))


def _fail(code: str, message: str, status: int) -> int:
    click.echo(json.dumps({"error": code, "message": message}), err=True)
    return status


def main(argv=None) -> int:
    """Run the CLI; failures print ``{"error", "message"}`` JSON on stderr and exit nonzero."""
    try:
        rv = cli.main(args=argv, prog_name="feedlab", standalone_mode=False)
    except click.exceptions.Abort:
        return _fail("aborted", "aborted", 130)
    except click.ClickException as exc:
        return _fail("usage", exc.format_message(), exc.exit_code or 2)
    except FeedlabError as exc:
        return _fail(exc.code, str(exc), 3)
    except (ValueError, OSError, KeyError) as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
