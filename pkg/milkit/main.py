"""
milkit command-line application
"""

import logging
from contextlib import contextmanager
from typing import Iterator, Optional

import typer
from rich.console import Console

from milkit.cli.commands import (
    SPLIT_CHOICES,
    cmd_benchmark,
    cmd_datagen,
    cmd_eval,
    cmd_inspect,
    cmd_train,
)
from milkit.cli.config_file import load_config, parse_overrides
from milkit.config import configure_logging, settings
from milkit.exceptions import DivergenceError, MILKitError

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_DIVERGENCE = 3

OVERRIDES = {"allow_extra_args": True, "ignore_unknown_options": True}

app = typer.Typer(
    name=settings.app_name,
    help="Deep multiple instance learning: datasets, models, training and benchmarks.",
    add_completion=False,
    no_args_is_help=True,
)
err_console = Console(stderr=True, markup=False, highlight=False, soft_wrap=True)

ConfigOption = typer.Option(None, "--config", help="JSON run configuration file")
SeedOption = typer.Option(None, "--seed", help="Seed for the run and the synthetic generator")
OutputOption = typer.Option(None, "--output", help="Output directory (overrides output_dir)")


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map milkit errors onto the CLI exit codes: 2 usage/config, 3 divergence"""
    try:
        yield
    except DivergenceError as e:
        logger.error(str(e))
        err_console.print(f"error: {e}")
        raise typer.Exit(EXIT_DIVERGENCE)
    except (MILKitError, FileNotFoundError) as e:
        err_console.print(f"error: {e}")
        raise typer.Exit(EXIT_USAGE)


@app.callback()
def main(log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides LOG_LEVEL")):
    configure_logging(log_level)


@app.command(context_settings=OVERRIDES)
def datagen(ctx: typer.Context, config: Optional[str] = ConfigOption,
            seed: Optional[int] = SeedOption, output: Optional[str] = OutputOption):
    """Generate a synthetic dataset in the processed storage format."""
    with exit_codes():
        cmd_datagen(load_config(config, parse_overrides(ctx.args), seed, output))


@app.command(context_settings=OVERRIDES)
def train(ctx: typer.Context, config: Optional[str] = ConfigOption,
          seed: Optional[int] = SeedOption, output: Optional[str] = OutputOption,
          resume: bool = typer.Option(False, "--resume", help="Re-evaluate the finished run in the output directory")):
    """Train one model and write its checkpoint and report."""
    with exit_codes():
        cmd_train(load_config(config, parse_overrides(ctx.args), seed, output), resume=resume)


@app.command("eval")
def evaluate(checkpoint: str = typer.Argument(..., help="Checkpoint directory"),
             dataset: str = typer.Argument(..., help="Processed dataset directory"),
             split: str = typer.Option("all", "--split", help=f"One of {', '.join(SPLIT_CHOICES)}"),
             output: Optional[str] = OutputOption):
    """Evaluate a checkpoint on a processed dataset."""
    with exit_codes():
        cmd_eval(checkpoint, dataset, split=split, output=output)


@app.command(context_settings=OVERRIDES)
def benchmark(ctx: typer.Context, config: Optional[str] = ConfigOption,
              seed: Optional[int] = SeedOption, output: Optional[str] = OutputOption):
    """Compare models over repeated train/validation splits."""
    with exit_codes():
        cmd_benchmark(load_config(config, parse_overrides(ctx.args), seed, output))


@app.command()
def inspect(path: str = typer.Argument(..., help="Dataset or checkpoint directory")):
    """Summarize a dataset or a checkpoint."""
    with exit_codes():
        cmd_inspect(path)


if __name__ == "__main__":
    app()
