"""
Benchmark drivers: dataset evaluation, the component ablation and the
hyperparameter sweep.
"""

import logging
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import AmpCsError, ParameterError
from .models import ActivationKind, AmpConfig, LossKind, ModelKind, NetConfig, TrainConfig
from .reconstruction import AmpReconstructor, BlockReconstructor, NetReconstructor, reconstruct_image
from .training import train
from .utils.report import EvalReport, EvalRow, ReportError, psnr

log = logging.getLogger(__name__)

NamedImage = Tuple[str, np.ndarray]

ATTENTION_FLAGS = ("init_attention", "spatial_attention", "channel_attention")


def evaluate_images(report: EvalReport, reconstructor: BlockReconstructor, images: Sequence[NamedImage],
                    ratio: float, timing: bool = True) -> None:
    """Append one row per image to report; failures become report errors."""
    for name, image in images:
        try:
            result = reconstruct_image(image, reconstructor)
        except AmpCsError as e:
            report.errors.append(ReportError.from_exception(e, file_path=name))
            continue
        reference = np.clip(np.round(image), 0.0, 255.0)
        report.rows.append(EvalRow(name, ratio, psnr(reference, result.image),
                                   result.seconds if timing else 0.0, result.fallback_blocks))


def run_evaluation(method: str, ratios: Sequence[float], images: Sequence[NamedImage],
                   make_reconstructor: Callable[[float], BlockReconstructor],
                   timing: bool = True) -> EvalReport:
    report = EvalReport(method)
    for ratio in ratios:
        try:
            reconstructor = make_reconstructor(ratio)
        except AmpCsError as e:
            report.errors.append(ReportError.from_exception(e))
            log.warning("skipping ratio %g: %s", ratio, e.message)
            continue
        evaluate_images(report, reconstructor, images, ratio, timing)
        log.info("%s at ratio %g: mean PSNR %.2f dB", method, ratio, report.mean_psnr(ratio))
    return report


def with_net(base: TrainConfig, **net_changes: Any) -> TrainConfig:
    """Copy of base with net fields replaced; attention flags re-resolve from the kind."""
    net = base.net.model_dump(exclude=set(ATTENTION_FLAGS))
    net.update(net_changes)
    return base.model_copy(update={"net": NetConfig.model_validate(net)})


@dataclass(frozen=True)
class AblationVariant:
    name: str
    amp: bool
    cnn: bool
    w_phi: bool
    a_q: bool = False
    a_s: bool = False
    a_c: bool = False

    @property
    def learned(self) -> bool:
        return self.cnn

    def net_changes(self) -> Dict[str, Any]:
        kind = ModelKind.AMPA_NET if (self.a_q or self.a_s or self.a_c) else ModelKind.AMP_NET
        changes: Dict[str, Any] = {"kind": kind, "learn_phi": self.w_phi, "amp_recurrence": self.amp}
        if not self.amp:
            # a single denoiser on the pinv estimate
            changes.update(stages=1, pinv_init=True)
        if kind == ModelKind.AMPA_NET:
            changes.update(init_attention=self.a_q, spatial_attention=self.a_s, channel_attention=self.a_c)
        return changes


ABLATION_VARIANTS: List[AblationVariant] = sorted([
    AblationVariant("amp", amp=True, cnn=False, w_phi=False),
    AblationVariant("cnn-only", amp=False, cnn=True, w_phi=False),
    AblationVariant("amp-net-fixed-phi", amp=True, cnn=True, w_phi=False),
    AblationVariant("amp-net", amp=True, cnn=True, w_phi=True),
    AblationVariant("ampa-net-aq", amp=True, cnn=True, w_phi=True, a_q=True),
    AblationVariant("ampa-net-as", amp=True, cnn=True, w_phi=True, a_s=True),
    AblationVariant("ampa-net-ac", amp=True, cnn=True, w_phi=True, a_c=True),
    AblationVariant("ampa-net", amp=True, cnn=True, w_phi=True, a_q=True, a_s=True, a_c=True),
], key=lambda v: v.name)

ABLATION_HEADER = ["variant", "amp", "cnn", "w_phi", "a_q", "a_s", "a_c", "ratio", "psnr_db"]


@dataclass
class AblationRow:
    variant: AblationVariant
    ratio: float
    psnr_db: float

    def as_csv(self) -> List[Any]:
        v = self.variant
        flags = [int(f) for f in (v.amp, v.cnn, v.w_phi, v.a_q, v.a_s, v.a_c)]
        return [v.name, *flags, self.ratio, self.psnr_db]


def run_ablation(base: TrainConfig, blocks: np.ndarray, images: Sequence[NamedImage],
                 amp_config: Optional[AmpConfig] = None,
                 variants: Sequence[AblationVariant] = ABLATION_VARIANTS) -> Tuple[List[AblationRow], List[ReportError]]:
    ratio = base.net.ratio
    rows: List[AblationRow] = []
    errors: List[ReportError] = []
    for variant in variants:
        started = time.perf_counter()
        try:
            if variant.learned:
                config = with_net(base, **variant.net_changes())
                reconstructor: BlockReconstructor = NetReconstructor(train(config, blocks).params)
            else:
                reconstructor = AmpReconstructor(ratio, base.net.block_size, base.net.seed, amp_config)
        except AmpCsError as e:
            errors.append(ReportError.from_exception(e, file_path=variant.name))
            log.warning("ablation variant %s failed: %s", variant.name, e.message)
            continue
        report = EvalReport(variant.name)
        evaluate_images(report, reconstructor, images, ratio, timing=False)
        errors.extend(report.errors)
        rows.append(AblationRow(variant, ratio, report.mean_psnr()))
        log.info("variant %s: %.2f dB (%.1f s)", variant.name, rows[-1].psnr_db, time.perf_counter() - started)
    return rows, errors


SWEEP_HEADER = ["param", "value", "psnr_db"]


def _sweep_config(base: TrainConfig, param: str, value: str) -> TrainConfig:
    if param == "stacks":
        return with_net(base, stages=int(value))
    if param == "epochs":
        return base.model_copy(update={"epochs": int(value)})
    if param == "batch":
        return base.model_copy(update={"batch_size": int(value)})
    if param == "lambda-o":
        return base.model_copy(update={"lambda_o": float(value)})
    if param == "loss":
        return base.model_copy(update={"loss": LossKind(value)})
    if param == "activation":
        return with_net(base, activation=ActivationKind(value))
    raise ParameterError(f"unknown sweep parameter {param!r}")


SWEEP_PARAMS = ("stacks", "epochs", "batch", "lambda-o", "loss", "activation")


def run_sweep(base: TrainConfig, param: str, values: Sequence[str], blocks: np.ndarray,
              images: Sequence[NamedImage]) -> Tuple[List[List[Any]], List[ReportError]]:
    """Train once per value of param and report the mean PSNR on images."""
    if param not in SWEEP_PARAMS:
        raise ParameterError(f"unknown sweep parameter {param!r}, expected one of {', '.join(SWEEP_PARAMS)}")
    rows: List[List[Any]] = []
    errors: List[ReportError] = []
    for value in values:
        try:
            config = TrainConfig.model_validate(_sweep_config(base, param, value).model_dump())
            params = train(config, blocks).params
        except ValueError as e:
            raise ParameterError(f"invalid {param} value {value!r}: {e}") from None
        except AmpCsError as e:
            errors.append(ReportError.from_exception(e, file_path=f"{param}={value}"))
            continue
        report = EvalReport(f"{param}={value}")
        evaluate_images(report, NetReconstructor(params), images, config.net.ratio, timing=False)
        errors.extend(report.errors)
        rows.append([param, value, report.mean_psnr()])
        log.info("sweep %s=%s: %.2f dB", param, value, rows[-1][2])
    return rows, errors
