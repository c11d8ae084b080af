import logging
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
import typer
from pydantic import ValidationError
from rich import print
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from typing_extensions import Annotated

from amp_cs import training
from amp_cs.benchmark import (ABLATION_HEADER, ATTENTION_FLAGS, SWEEP_HEADER, SWEEP_PARAMS,
                              run_ablation, run_evaluation, run_sweep)
from amp_cs.checkpoint import load_checkpoint, restore_model
from amp_cs.data import load_corpus, sample_blocks, synthetic_blocks
from amp_cs.errors import (AmpCsError, CheckpointError, DataError, DivergenceError, NumericError,
                           SingularMatrixError)
from amp_cs.image_io import list_images, read_image, write_image
from amp_cs.models import ActivationKind, AmpConfig, LossKind, ModelKind, NetConfig, TrainConfig, load_yaml_config
from amp_cs.nets import count_parameters, init_params
from amp_cs.reconstruction import AmpReconstructor, BlockReconstructor, NetReconstructor, reconstruct_image
from amp_cs.sensing import make_gaussian_phi
from amp_cs.utils.report import print_errors, print_eval_report, write_csv, write_eval_csv

app = typer.Typer(help="Block compressed sensing with AMP, AMP-Net and AMPA-Net", no_args_is_help=True)
console = Console()
log = logging.getLogger("amp_cs.cli")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

DEFAULT_RATIOS = "0.01,0.04,0.10,0.25,0.40,0.50"
CORPUS_SEED_STREAM = 11


class Method(str, Enum):
    AMP = "amp"
    AMP_NET = "amp-net"
    AMPA_NET = "ampa-net"


SeedOption = Annotated[Optional[int], typer.Option(envvar="AMP_SEED", help="Random seed (default 0)")]
ConfigOption = Annotated[Optional[Path], typer.Option("--config", help="YAML training configuration")]
CorpusOption = Annotated[Optional[Path], typer.Option(help="Directory of training images")]
SyntheticOption = Annotated[bool, typer.Option(help="Train on synthetic piecewise-smooth blocks")]
EpochsOption = Annotated[Optional[int], typer.Option(help="Training epochs (default 200)")]
BatchOption = Annotated[Optional[int], typer.Option(help="Blocks per batch (default 64)")]
LrOption = Annotated[Optional[float], typer.Option(help="Adam learning rate (default 1e-4)")]
StacksOption = Annotated[Optional[int], typer.Option(help="Unrolled stages K (default 9)")]
LambdaOption = Annotated[Optional[float], typer.Option("--lambda-o", help="Symmetry loss weight (default 0.01)")]
ChannelsOption = Annotated[Optional[int], typer.Option(help="CNN feature channels (default 32)")]
BlockSizeOption = Annotated[Optional[int], typer.Option(help="Block side length (default 33)")]
BlocksOption = Annotated[Optional[int], typer.Option(help="Training blocks cropped from the corpus (default 8912)")]
CkptDirOption = Annotated[Optional[Path], typer.Option(help="Directory holding <method>_<ratio>.ampck files")]
ItersOption = Annotated[int, typer.Option(help="Maximum AMP iterations")]
AlphaOption = Annotated[float, typer.Option(help="AMP threshold multiplier")]
FixedPhiOption = Annotated[bool, typer.Option(help="Sense with the seeded Gaussian Phi instead of the learned W_phi")]


@app.callback()
def main(
    log_level: Annotated[str, typer.Option(envvar="AMP_CS_LOG_LEVEL", help="Logging level")] = "INFO",
):
    level = log_level.upper()
    if level not in logging.getLevelNamesMapping():
        raise typer.BadParameter(f"unknown log level {log_level!r}")
    logging.basicConfig(level=level, format="%(message)s", datefmt="[%X]", force=True,
                        handlers=[RichHandler(console=console, show_path=False)])


@contextmanager
def exit_codes() -> Iterator[None]:
    """Map library errors onto the CLI exit codes."""
    try:
        yield
    except ValidationError as e:
        print(f"[red]Invalid configuration:[/red]\n{e}")
        raise typer.Exit(code=EXIT_USAGE)
    except (DataError, CheckpointError) as e:
        print(f"[red]{e.error_type}: {e.message}[/red]")
        raise typer.Exit(code=EXIT_DATA)
    except (NumericError, DivergenceError, SingularMatrixError) as e:
        print(f"[red]{e.error_type}: {e.message}[/red]")
        raise typer.Exit(code=EXIT_NUMERIC)
    except AmpCsError as e:
        print(f"[red]{e.error_type}: {e.message}[/red]")
        raise typer.Exit(code=EXIT_USAGE)


def build_train_config(config_path: Optional[Path], seed: Optional[int], net: Dict[str, Any],
                       train: Dict[str, Any]) -> TrainConfig:
    """YAML values first, then every flag that was given."""
    data = load_yaml_config(config_path) if config_path else {}
    net_data = dict(data.pop("net", None) or {})
    net_data.update({k: v for k, v in net.items() if v is not None})
    data.update({k: v for k, v in train.items() if v is not None})
    if seed is not None:
        net_data["seed"] = seed
        data["seed"] = seed
    data["net"] = net_data
    return TrainConfig.model_validate(data)


def training_blocks(config: TrainConfig, corpus: Optional[Path], synthetic: bool) -> np.ndarray:
    block_size = config.net.block_size
    if synthetic:
        return synthetic_blocks(config.blocks, block_size, config.seed)
    corpus = corpus or config.corpus
    if corpus is None:
        raise typer.BadParameter("give --corpus DIR or --synthetic")
    rng = np.random.default_rng([config.seed, CORPUS_SEED_STREAM])
    return sample_blocks(load_corpus(corpus), config.blocks, block_size, rng)


def load_dataset(dataset: Path) -> List:
    paths = list_images(dataset)
    if not paths:
        raise DataError(f"no images found in {dataset}", details={"file_path": str(dataset)})
    return [(p.name, read_image(p)) for p in paths]


def checkpoint_name(method: str, ratio: float) -> str:
    return f"{method}_{ratio:g}.ampck"


def make_reconstructor(method: Method, ratio: float, ckpt: Optional[Path], block_size: int,
                       seed: int, amp_config: AmpConfig, fixed_phi: bool) -> BlockReconstructor:
    if method == Method.AMP:
        return AmpReconstructor(ratio, block_size, seed, amp_config)
    if ckpt is None:
        raise CheckpointError(f"{method.value} needs a checkpoint", defect="NOT_FOUND")
    checkpoint = load_checkpoint(ckpt)
    stored = checkpoint.manifest.net
    if abs(stored.ratio - ratio) > 1e-12:
        raise CheckpointError(f"{ckpt} was trained at ratio {stored.ratio:g}, not {ratio:g}",
                              defect="RATIO_MISMATCH")
    expected = stored
    if stored.kind.value != method.value:
        expected = NetConfig.model_validate(
            {**stored.model_dump(exclude=set(ATTENTION_FLAGS)), "kind": method.value})
    params, _ = restore_model(checkpoint, expected)
    phi = make_gaussian_phi(ratio, params.n_p, seed).phi if fixed_phi else None
    return NetReconstructor(params, phi)


@app.command("train", help="Train an AMP-Net or AMPA-Net and write a checkpoint")
def train_command(
    model: Annotated[Optional[ModelKind], typer.Option(help="Network to train (default amp-net)")] = None,
    ratio: Annotated[Optional[float], typer.Option(help="Sampling ratio in (0, 1]")] = None,
    corpus: CorpusOption = None,
    synthetic: SyntheticOption = False,
    epochs: EpochsOption = None,
    batch: BatchOption = None,
    lr: LrOption = None,
    stacks: StacksOption = None,
    lambda_o: LambdaOption = None,
    channels: ChannelsOption = None,
    block_size: BlockSizeOption = None,
    blocks: BlocksOption = None,
    loss: Annotated[Optional[LossKind], typer.Option(help="Reconstruction loss (default charbonnier)")] = None,
    fixed_phi: FixedPhiOption = False,
    inner_relu: Annotated[bool, typer.Option(help="ReLU inside blocks 2 and 4")] = False,
    activation: Annotated[Optional[ActivationKind], typer.Option(help="Nonlinearity after block 3 (default relu)")] = None,
    checkpoint_every: Annotated[Optional[int], typer.Option(help="Epochs between checkpoints")] = None,
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: Annotated[Optional[Path], typer.Option(help="Checkpoint path (default <model>_<ratio>.ampck)")] = None,
    loss_csv: Annotated[Optional[Path], typer.Option(help="Per-epoch loss CSV (default next to the checkpoint)")] = None,
):
    with exit_codes():
        net = {"kind": model.value if model else None, "ratio": ratio, "stages": stacks, "channels": channels,
               "block_size": block_size, "learn_phi": False if fixed_phi else None,
               "inner_relu": True if inner_relu else None, "activation": activation}
        train_cfg = {"epochs": epochs, "batch_size": batch, "lr": lr, "lambda_o": lambda_o,
                     "blocks": blocks, "loss": loss, "checkpoint_every": checkpoint_every, "corpus": corpus}
        cfg = build_train_config(config, seed, net, train_cfg)
        data = training_blocks(cfg, corpus, synthetic)
        out = out or Path(checkpoint_name(cfg.net.kind.value, cfg.net.ratio))
        loss_csv = loss_csv or out.with_name(f"{out.stem}_loss.csv")

        print(f"[cyan]Training {cfg.net.kind.value} at ratio {cfg.net.ratio:g} on {len(data)} blocks...[/cyan]")
        result = training.train(cfg, data, checkpoint_path=out)
        write_csv(loss_csv, ["epoch", "L_total", "L_R", "L_O"],
                  [[r.epoch, r.total, r.recon, r.ortho] for r in result.history])
        print(f"[green]Loss {result.initial_loss.total:.6f} -> {result.final_loss.total:.6f}[/green]")
        print(f"[green]Checkpoint written to {out}, loss history to {loss_csv}[/green]")


@app.command("reconstruct", help="Reconstruct images from simulated block measurements")
def reconstruct_command(
    method: Annotated[Method, typer.Option(help="Reconstruction method")],
    ratio: Annotated[float, typer.Option(help="Sampling ratio in (0, 1]")],
    inputs: Annotated[List[Path], typer.Option("--input", help="Image file (repeatable)")],
    ckpt: Annotated[Optional[Path], typer.Option(help="Checkpoint for amp-net / ampa-net")] = None,
    out: Annotated[Path, typer.Option(help="Output directory")] = Path("reconstructed"),
    iters: ItersOption = 100,
    alpha: AlphaOption = 1.0,
    block_size: Annotated[int, typer.Option(help="Block side length for amp")] = 33,
    fixed_phi: FixedPhiOption = False,
    seed: SeedOption = None,
):
    with exit_codes():
        amp_config = AmpConfig(max_iters=iters, alpha=alpha)
        reconstructor = make_reconstructor(method, ratio, ckpt, block_size, seed or 0, amp_config, fixed_phi)
        table = Table(title=f"{method.value} at ratio {ratio:g}")
        for column in ("image", "output", "seconds", "pinv fallbacks"):
            table.add_column(column)
        out.mkdir(parents=True, exist_ok=True)
        for path in inputs:
            result = reconstruct_image(read_image(path), reconstructor)
            written = write_image(out / path.name, result.image)
            table.add_row(path.name, str(written), f"{result.seconds:.3f}", str(result.fallback_blocks))
        console.print(table)


@app.command("eval", help="Mean PSNR of a method over a dataset at several ratios")
def eval_command(
    method: Annotated[Method, typer.Option(help="Reconstruction method")],
    dataset: Annotated[Path, typer.Option(help="Directory of test images")],
    ratios: Annotated[str, typer.Option(help="Comma-separated sampling ratios")] = DEFAULT_RATIOS,
    ckpt_dir: CkptDirOption = None,
    iters: ItersOption = 100,
    alpha: AlphaOption = 1.0,
    block_size: Annotated[int, typer.Option(help="Block side length for amp")] = 33,
    fixed_phi: FixedPhiOption = False,
    seed: SeedOption = None,
    csv: Annotated[Path, typer.Option(help="Output CSV")] = Path("eval.csv"),
    timing: Annotated[bool, typer.Option(help="Record wall-clock seconds (0.0 when off)")] = True,
):
    with exit_codes():
        try:
            ratio_values = [float(r) for r in ratios.split(",") if r.strip()]
        except ValueError:
            raise typer.BadParameter(f"invalid ratio list {ratios!r}")
        if method != Method.AMP and ckpt_dir is None:
            raise typer.BadParameter(f"{method.value} needs --ckpt-dir")
        images = load_dataset(dataset)
        amp_config = AmpConfig(max_iters=iters, alpha=alpha)

        def for_ratio(ratio: float) -> BlockReconstructor:
            ckpt = ckpt_dir / checkpoint_name(method.value, ratio) if ckpt_dir else None
            return make_reconstructor(method, ratio, ckpt, block_size, seed or 0, amp_config, fixed_phi)

        report = run_evaluation(method.value, ratio_values, images, for_ratio, timing)
        write_eval_csv(report, csv)
        print_eval_report(report, console)
        print(f"[green]Results written to {csv}[/green]")
        if not report.success:
            raise typer.Exit(code=EXIT_DATA)


@app.command("ablate", help="Train and score every component variant at one ratio")
def ablate_command(
    ratio: Annotated[float, typer.Option(help="Sampling ratio in (0, 1]")],
    dataset: Annotated[Path, typer.Option(help="Directory of test images")],
    corpus: CorpusOption = None,
    synthetic: SyntheticOption = False,
    epochs: EpochsOption = None,
    batch: BatchOption = None,
    lr: LrOption = None,
    stacks: StacksOption = None,
    lambda_o: LambdaOption = None,
    channels: ChannelsOption = None,
    block_size: BlockSizeOption = None,
    blocks: BlocksOption = None,
    iters: ItersOption = 100,
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: Annotated[Path, typer.Option(help="Output CSV")] = Path("ablation.csv"),
):
    with exit_codes():
        net = {"ratio": ratio, "stages": stacks, "channels": channels, "block_size": block_size}
        train_cfg = {"epochs": epochs, "batch_size": batch, "lr": lr, "lambda_o": lambda_o, "blocks": blocks}
        cfg = build_train_config(config, seed, net, train_cfg)
        data = training_blocks(cfg, corpus, synthetic)
        images = load_dataset(dataset)
        rows, errors = run_ablation(cfg, data, images, AmpConfig(max_iters=iters))
        write_csv(out, ABLATION_HEADER, [row.as_csv() for row in rows])

        table = Table(title=f"Ablation at ratio {ratio:g}")
        for column in ABLATION_HEADER:
            table.add_column(column)
        for row in rows:
            table.add_row(*[f"{v:.2f}" if isinstance(v, float) else str(v) for v in row.as_csv()])
        console.print(table)
        print(f"[green]Results written to {out}[/green]")
        if errors:
            print_errors(errors, console)
            raise typer.Exit(code=EXIT_DATA)


@app.command("sweep", help="Mean PSNR as one training hyperparameter varies")
def sweep_command(
    param: Annotated[str, typer.Option(help=f"One of {', '.join(SWEEP_PARAMS)}")],
    values: Annotated[str, typer.Option(help="Comma-separated values")],
    ratio: Annotated[float, typer.Option(help="Sampling ratio in (0, 1]")],
    dataset: Annotated[Path, typer.Option(help="Directory of test images")],
    model: Annotated[Optional[ModelKind], typer.Option(help="Network to train (default amp-net)")] = None,
    corpus: CorpusOption = None,
    synthetic: SyntheticOption = False,
    epochs: EpochsOption = None,
    batch: BatchOption = None,
    lr: LrOption = None,
    stacks: StacksOption = None,
    lambda_o: LambdaOption = None,
    channels: ChannelsOption = None,
    block_size: BlockSizeOption = None,
    blocks: BlocksOption = None,
    config: ConfigOption = None,
    seed: SeedOption = None,
    out: Annotated[Path, typer.Option(help="Output CSV")] = Path("sweep.csv"),
):
    if param not in SWEEP_PARAMS:
        raise typer.BadParameter(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    with exit_codes():
        net = {"kind": model.value if model else None, "ratio": ratio, "stages": stacks, "channels": channels,
               "block_size": block_size}
        train_cfg = {"epochs": epochs, "batch_size": batch, "lr": lr, "lambda_o": lambda_o, "blocks": blocks}
        cfg = build_train_config(config, seed, net, train_cfg)
        data = training_blocks(cfg, corpus, synthetic)
        images = load_dataset(dataset)
        rows, errors = run_sweep(cfg, param, [v.strip() for v in values.split(",") if v.strip()], data, images)
        write_csv(out, SWEEP_HEADER, rows)
        for name, value, score in rows:
            print(f"  {name}={value}: [bold]{score:.2f} dB[/bold]")
        print(f"[green]Results written to {out}[/green]")
        if errors:
            print_errors(errors, console)
            raise typer.Exit(code=EXIT_DATA)


@app.command("info", help="Parameter counts of AMP-Net and AMPA-Net")
def info_command(
    ratio: Annotated[float, typer.Option(help="Sampling ratio in (0, 1]")] = 0.25,
    stacks: Annotated[int, typer.Option(help="Unrolled stages K")] = 9,
    channels: Annotated[int, typer.Option(help="CNN feature channels")] = 32,
    block_size: Annotated[int, typer.Option(help="Block side length")] = 33,
    mlp_hidden: Annotated[int, typer.Option(help="Initial attention hidden width")] = 128,
):
    with exit_codes():
        table = Table(title=f"Parameters at ratio {ratio:g}, K={stacks}")
        table.add_column("model")
        table.add_column("m_p", justify="right")
        table.add_column("parameters", justify="right")
        for kind in ModelKind:
            params = init_params(NetConfig(kind=kind, ratio=ratio, stages=stacks, channels=channels,
                                           block_size=block_size, mlp_hidden=mlp_hidden))
            table.add_row(kind.value, str(params.m_p), f"{count_parameters(params):,}")
        console.print(table)


if __name__ == "__main__":
    app()
