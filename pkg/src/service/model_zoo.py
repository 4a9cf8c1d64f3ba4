"""
모델 저장소 (model zoo) 서비스
- 선언적 ModelSpec 프리셋 (U-Net_B_RF 9종, HRNet, PatchGAN 판별자)
- 시드 고정 생성자/판별자 생성
- 해석적 수용 영역 계산 + 기울기 footprint 기반 실측
- head 교체, 이름/shape 기반 가중치 전이
"""
import copy
from contextlib import contextmanager, nullcontext
from typing import Dict, List, Optional, Sequence, Tuple, Union

import torch
from torch import nn

from src.config.settings import Family, HeadKind, runtime_config
from src.infra.networks import (
    GeneratorNetwork, HRNetGenerator, Network, PatchDiscriminator, UNetGenerator, make_head
)
from src.infra.networks.layers import init_weights
from src.infra.networks.unet import split_unet_layers
from src.models.model_spec import LayerKind, LayerSpec, ModelSpec
from src.models.records import CheckpointRecord, TransferReport
from src.utils import CheckpointError, ModelSpecError, ProbeSizeError, TransferError
from src.utils.logger import get_logger

logger = get_logger(__name__)

# 블록 수별 허용 수용 영역
PRESET_RECEPTIVE_FIELDS: Dict[int, Tuple[int, ...]] = {
    2: (44, 84, 116),
    3: (96, 176, 240),
    4: (200, 360, 424),
}

# 인코더 단계 + bottleneck 의 dilation 스케줄 (stem 5x5, 3x3 잔차 블록, 2x2/2 strided conv 다운샘플)
UNET_DILATIONS: Dict[Tuple[int, int], Tuple[int, ...]] = {
    (2, 44): (1, 2, 1),
    (2, 84): (1, 3, 3),
    (2, 116): (1, 3, 5),
    (3, 96): (1, 2, 2, 1),
    (3, 176): (1, 2, 3, 3),
    (3, 240): (1, 2, 3, 5),
    (4, 200): (1, 2, 2, 2, 1),
    (4, 360): (1, 2, 2, 3, 3),
    (4, 424): (1, 2, 2, 3, 4),
}

STEM_KERNEL = 5
HRNET_NAME = "HRNet"
DISCRIMINATOR_NAME = "PatchGAN_70"

GENERATOR_FAMILIES = (Family.UNET, Family.HRNET)


def unet_preset_names() -> List[str]:
    return [f"U-Net_{blocks}_{rf}" for blocks, rf in UNET_DILATIONS]


def list_presets() -> List[str]:
    """이름으로 조회 가능한 생성자 프리셋 목록"""
    return unet_preset_names() + [HRNET_NAME]


def _stage_width(width: int, level: int) -> int:
    return width * 2 ** min(level, 3)


def unet_spec(blocks: int, rf: int, in_channels: int = 1, out_channels: int = 1, width: int = 16) -> ModelSpec:
    """U-Net_{blocks}_{rf} 스펙 생성"""
    key = (blocks, rf)
    if key not in UNET_DILATIONS:
        allowed = PRESET_RECEPTIVE_FIELDS.get(blocks)
        if allowed is None:
            raise ModelSpecError(f"U-Net 블록 수는 {sorted(PRESET_RECEPTIVE_FIELDS)} 중 하나여야 합니다: {blocks}")
        raise ModelSpecError(f"U-Net_{blocks} 의 수용 영역은 {allowed} 중 하나여야 합니다: {rf}")
    dilations = UNET_DILATIONS[key]

    layers = [LayerSpec(kind=LayerKind.CONV, kernel=STEM_KERNEL, channels=width)]
    for level in range(blocks):
        layers.append(LayerSpec(kind=LayerKind.RESIDUAL_BLOCK, kernel=3, dilation=dilations[level],
                                channels=_stage_width(width, level)))
        layers.append(LayerSpec(kind=LayerKind.DOWN, kernel=2, stride=2, channels=_stage_width(width, level + 1)))
    layers.append(LayerSpec(kind=LayerKind.RESIDUAL_BLOCK, kernel=3, dilation=dilations[blocks],
                            channels=_stage_width(width, blocks)))
    for level in reversed(range(blocks)):
        layers.append(LayerSpec(kind=LayerKind.UP, kernel=1, stride=2))
        layers.append(LayerSpec(kind=LayerKind.SKIP_MERGE, kernel=1, channels=_stage_width(width, level)))
        layers.append(LayerSpec(kind=LayerKind.CONV, kernel=1, channels=_stage_width(width, level)))

    return ModelSpec(
        family=Family.UNET, name=f"U-Net_{blocks}_{rf}", blocks=blocks, stage_layers=layers,
        target_rf=rf, in_channels=in_channels, out_channels=out_channels, width=width
    )


def hrnet_spec(in_channels: int = 1, out_channels: int = 1, width: int = 16, branches: int = 4) -> ModelSpec:
    """축소 폭 HRNet 스펙. stage_layers 는 가장 낮은 해상도 스트림을 지나는 경로를 기술한다."""
    low = branches - 1
    layers = [
        LayerSpec(kind=LayerKind.CONV, kernel=3, channels=width),
        LayerSpec(kind=LayerKind.CONV, kernel=3, channels=width),
        LayerSpec(kind=LayerKind.RESIDUAL_BLOCK, kernel=3, channels=width),
        LayerSpec(kind=LayerKind.RESIDUAL_BLOCK, kernel=3, channels=width),
    ]
    for level in range(1, branches):
        layers.append(LayerSpec(kind=LayerKind.DOWN, kernel=3, stride=2, channels=width * 2 ** level))
        layers.append(LayerSpec(kind=LayerKind.RESIDUAL_BLOCK, kernel=3, channels=width * 2 ** level))
        layers.append(LayerSpec(kind=LayerKind.RESIDUAL_BLOCK, kernel=3, channels=width * 2 ** level))
    for _ in range(low):
        layers.append(LayerSpec(kind=LayerKind.UP, kernel=1, stride=2))
    layers.append(LayerSpec(kind=LayerKind.CONV, kernel=1, channels=width))
    return ModelSpec(
        family=Family.HRNET, name=HRNET_NAME, blocks=low, stage_layers=layers,
        in_channels=in_channels, out_channels=out_channels, width=width
    )


def discriminator_spec(image_channels: int = 1, width: int = 16) -> ModelSpec:
    """70x70 수용 영역 PatchGAN 판별자 스펙 (입력은 조건 x 와 y 를 이어 붙인 2배 채널)"""
    layers = [
        LayerSpec(kind=LayerKind.CONV, kernel=4, stride=2, channels=width),
        LayerSpec(kind=LayerKind.CONV, kernel=4, stride=2, channels=width * 2),
        LayerSpec(kind=LayerKind.CONV, kernel=4, stride=2, channels=width * 4),
        LayerSpec(kind=LayerKind.CONV, kernel=4, stride=1, channels=width * 8),
        LayerSpec(kind=LayerKind.CONV, kernel=4, stride=1, channels=1),
    ]
    return ModelSpec(
        family=Family.PATCHGAN_DISC, name=DISCRIMINATOR_NAME, stage_layers=layers, target_rf=70,
        in_channels=2 * image_channels, out_channels=1, width=width
    )


def get_preset(name: str, in_channels: int = 1, out_channels: int = 1, width: int = 16) -> ModelSpec:
    """이름으로 프리셋 스펙 조회"""
    if name == HRNET_NAME:
        return hrnet_spec(in_channels, out_channels, width)
    if name == DISCRIMINATOR_NAME:
        return discriminator_spec(in_channels, width)
    parts = name.split("_")
    if len(parts) == 3 and parts[0] == "U-Net" and parts[1].isdigit() and parts[2].isdigit():
        key = (int(parts[1]), int(parts[2]))
        if key in UNET_DILATIONS:
            return unet_spec(*key, in_channels=in_channels, out_channels=out_channels, width=width)
    raise ModelSpecError(f"알 수 없는 스펙 이름: {name}. 사용 가능한 프리셋: {', '.join(list_presets())}")


# === 수용 영역 ===

def _check_layer(index: int, layer: LayerSpec):
    if layer.kernel < 1 or layer.stride < 1 or layer.dilation < 1:
        raise ModelSpecError(
            f"레이어 {index} ({layer.kind.value}) 의 kernel/stride/dilation 은 1 이상이어야 합니다: "
            f"{layer.kernel}/{layer.stride}/{layer.dilation}"
        )


def describe_layers(spec: Union[ModelSpec, Sequence[LayerSpec]]) -> List[Dict[str, int]]:
    """레이어별 (jump, 누적 수용 영역) 표. RF ← RF + (k−1)·d·jump, jump ← jump·stride"""
    layers = spec.stage_layers if isinstance(spec, ModelSpec) else list(spec)
    rf, jump = 1, 1
    rows = []
    for index, layer in enumerate(layers):
        _check_layer(index, layer)
        span = (layer.kernel - 1) * layer.dilation
        if layer.kind is LayerKind.UP:
            if jump % layer.stride:
                raise ModelSpecError(f"레이어 {index}: up 배율 {layer.stride} 이 누적 stride {jump} 를 나누지 않습니다.")
            jump //= layer.stride
            rf += span * jump
        elif layer.kind is LayerKind.RESIDUAL_BLOCK:
            rf += 2 * span * jump
        elif layer.kind in (LayerKind.CONV, LayerKind.DOWN, LayerKind.SKIP_MERGE):
            rf += span * jump
            jump *= layer.stride
        rows.append({
            "index": index, "kind": layer.kind.value, "kernel": layer.kernel, "stride": layer.stride,
            "dilation": layer.dilation, "jump": jump, "rf": rf
        })
    return rows


def receptive_field(spec: Union[ModelSpec, Sequence[LayerSpec]]) -> int:
    """해석적 수용 영역 (픽셀)"""
    rows = describe_layers(spec)
    return rows[-1]["rf"] if rows else 1


def _linearize(module: nn.Module):
    """정규화/활성화를 제거하고 conv 가중치를 양의 평균 필터로 바꾼다 (footprint 상쇄 방지)"""
    for name, child in module.named_children():
        if isinstance(child, (nn.InstanceNorm2d, nn.BatchNorm2d, nn.LeakyReLU, nn.ReLU, nn.Sigmoid,
                              nn.Tanh, nn.Dropout)):
            setattr(module, name, nn.Identity())
        else:
            _linearize(child)
    if isinstance(module, nn.Conv2d):
        with torch.no_grad():
            module.weight.fill_(1.0 / module.weight[0].numel())
            if module.bias is not None:
                module.bias.zero_()


def _round_up(value: int, multiple: int) -> int:
    return -(-value // multiple) * multiple


def measure_receptive_field(net: nn.Module, probe_size: Optional[int] = None, in_channels: int = 1) -> int:
    """중심 출력 픽셀의 기울기 footprint bounding box 한 변 (픽셀)"""
    spec: Optional[ModelSpec] = getattr(net, "spec", None)
    multiple = spec.size_multiple if spec is not None else 1
    if spec is not None:
        in_channels = spec.in_channels
    if probe_size is None:
        hint = receptive_field(spec) if spec is not None and spec.stage_layers else 33
        if spec is None or spec.family is not Family.UNET:
            # 병렬 스트림과 짝수 커널은 stage_layers 경로보다 footprint 가 넓거나 비대칭일 수 있음
            probe_size = _round_up(2 * hint, 2 * multiple)
        else:
            probe_size = _round_up(hint + 2 * multiple + 4, 2 * multiple)
    if probe_size % multiple:
        raise ProbeSizeError(f"probe 크기 {probe_size} 는 {multiple} 의 배수여야 합니다.")

    dtype = getattr(torch, runtime_config.probe_dtype)
    probe = copy.deepcopy(net).to(dtype=dtype, device="cpu")
    _linearize(probe)
    probe.eval()

    x = torch.zeros(1, in_channels, probe_size, probe_size, dtype=dtype, requires_grad=True)
    out = probe(*x.chunk(2, dim=1)) if isinstance(probe, PatchDiscriminator) else probe(x)
    center_row, center_col = out.shape[-2] // 2, out.shape[-1] // 2
    out[0, 0, center_row, center_col].backward()

    footprint = (x.grad[0].abs().sum(dim=0) > 0).nonzero()
    if footprint.numel() == 0:
        return 0
    rows, cols = footprint[:, 0], footprint[:, 1]
    last = probe_size - 1
    if rows.min() == 0 or cols.min() == 0 or rows.max() == last or cols.max() == last:
        raise ProbeSizeError(
            f"probe 입력({probe_size}x{probe_size})이 footprint 를 담기에 작습니다. 더 큰 probe_size 를 사용하세요."
        )
    height = int(rows.max() - rows.min()) + 1
    width = int(cols.max() - cols.min()) + 1
    return max(height, width)


# === 생성 ===

@contextmanager
def seeded(seed: int):
    """전역 RNG 를 오염시키지 않는 시드 고정 구간"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        yield


def _check_up_down(spec: ModelSpec):
    pending: List[int] = []
    for index, layer in enumerate(spec.stage_layers):
        if layer.kind is LayerKind.DOWN or (layer.kind is LayerKind.CONV and layer.stride > 1):
            pending.append(layer.stride)
        elif layer.kind is LayerKind.UP:
            if not pending or pending.pop() != layer.stride:
                raise ModelSpecError(f"{spec.name}: 레이어 {index} 의 up 이 직전 down 의 배율을 되돌리지 않습니다.")


def validate_spec(spec: ModelSpec):
    """ModelSpec 불변식 검증"""
    for index, layer in enumerate(spec.stage_layers):
        _check_layer(index, layer)

    if spec.family is Family.UNET:
        allowed = PRESET_RECEPTIVE_FIELDS.get(spec.blocks)
        if allowed is None:
            raise ModelSpecError(
                f"{spec.name}: U-Net 블록 수는 {sorted(PRESET_RECEPTIVE_FIELDS)} 중 하나여야 합니다: {spec.blocks}"
            )
        if spec.target_rf not in allowed:
            raise ModelSpecError(f"{spec.name}: U-Net_{spec.blocks} 의 수용 영역은 {allowed} 중 하나여야 합니다: {spec.target_rf}")
        _, encoder, _, _ = split_unet_layers(spec)
        if len(encoder) != spec.blocks:
            raise ModelSpecError(f"{spec.name}: 인코더 단계 수 {len(encoder)} != blocks {spec.blocks}")
        for index, layer in enumerate(spec.stage_layers):
            if layer.kind in (LayerKind.CONV, LayerKind.RESIDUAL_BLOCK, LayerKind.SKIP_MERGE) and layer.kernel % 2 == 0:
                raise ModelSpecError(f"{spec.name}: 레이어 {index} 는 same 패딩을 위해 홀수 커널이어야 합니다.")
            if layer.kind is LayerKind.DOWN and (layer.kernel < layer.stride or (layer.kernel - layer.stride) % 2):
                raise ModelSpecError(f"{spec.name}: 레이어 {index} down 은 kernel-stride 가 0 이상 짝수여야 합니다.")
    elif spec.family is Family.HRNET:
        if spec.blocks is None or not 1 <= spec.blocks <= 4:
            raise ModelSpecError(f"{spec.name}: HRNet 저해상도 스트림 수는 1~4 여야 합니다: {spec.blocks}")

    _check_up_down(spec)
    if spec.target_rf is not None and spec.stage_layers:
        rf = receptive_field(spec)
        if rf != spec.target_rf:
            raise ModelSpecError(f"{spec.name}: 계산된 수용 영역 {rf} != target_rf {spec.target_rf}")


def build_generator(spec: ModelSpec, seed: int = 0) -> GeneratorNetwork:
    """시드 고정 생성자 생성 (forward(HxW) → HxW)"""
    if spec.family not in GENERATOR_FAMILIES:
        raise ModelSpecError(f"{spec.name}: 생성자 계열은 {[f.value for f in GENERATOR_FAMILIES]} 중 하나여야 합니다.")
    validate_spec(spec)
    with seeded(seed):
        net = UNetGenerator(spec) if spec.family is Family.UNET else HRNetGenerator(spec)
        init_weights(net)
    logger.debug(f"생성자 생성: {spec.name} (seed={seed}, params={count_parameters(net):,})")
    return net


def build_discriminator(spec: ModelSpec, seed: int = 0) -> PatchDiscriminator:
    """시드 고정 PatchGAN 판별자 생성"""
    if spec.family is not Family.PATCHGAN_DISC:
        raise ModelSpecError(f"{spec.name}: 판별자 계열은 patchgan_disc 여야 합니다.")
    if spec.in_channels % 2:
        raise ModelSpecError(f"{spec.name}: 판별자 입력 채널({spec.in_channels})은 이미지 채널의 2배(짝수)여야 합니다.")
    validate_spec(spec)
    with seeded(seed):
        net = PatchDiscriminator(spec)
        init_weights(net)
    return net


def count_parameters(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


# === head 교체 / 가중치 전이 ===

def replace_head(net: GeneratorNetwork, task: Union[HeadKind, str], seed: Optional[int] = None) -> GeneratorNetwork:
    """마지막 projection 을 새로 초기화된 task head 로 교체한 사본 반환 (몸체 파라미터는 그대로)"""
    if not isinstance(net, GeneratorNetwork):
        raise ModelSpecError("head 교체는 생성자에만 적용할 수 있습니다.")
    try:
        kind = HeadKind(task)
    except ValueError:
        raise ModelSpecError(f"알 수 없는 task: {task}. 허용: {[k.value for k in HeadKind]}")

    new_net = copy.deepcopy(net)
    with seeded(seed) if seed is not None else nullcontext():
        head = make_head(kind, new_net.feature_channels, new_net.spec.out_channels)
        init_weights(head)
    new_net.head = head
    new_net.head_kind = kind
    return new_net


def transfer_weights(source: Network, target: Network) -> Tuple[Network, TransferReport]:
    """이름과 shape 이 일치하는 파라미터를 source → target 으로 복사 (target 을 제자리 갱신)"""
    if source.spec.family != target.spec.family:
        raise TransferError(
            f"계열이 다른 네트워크 간 전이는 불가합니다: {source.spec.family.value} → {target.spec.family.value}"
        )
    source_state = source.state_dict()
    target_state = target.state_dict()

    report = TransferReport()
    merged = {}
    for name, tensor in target_state.items():
        src = source_state.get(name)
        if src is not None and src.shape == tensor.shape:
            merged[name] = src.detach().clone()
            report.transferred.append(name)
        else:
            report.missing.append(name)
    report.skipped = [name for name in source_state if name not in merged]

    if not report.transferred:
        raise TransferError(f"일치하는 파라미터가 없습니다: {source.spec.name} → {target.spec.name}")

    target.load_state_dict(merged, strict=False)
    logger.info(
        f"가중치 전이: {source.spec.name} → {target.spec.name} "
        f"(전이 {len(report.transferred)}, 건너뜀 {len(report.skipped)}, 누락 {len(report.missing)})"
    )
    return target, report


def network_from_record(record: CheckpointRecord) -> Network:
    """체크포인트 레코드로부터 네트워크 복원 (head 종류 포함)"""
    if record.spec.family is Family.PATCHGAN_DISC:
        net = build_discriminator(record.spec)
    else:
        net = build_generator(record.spec)
        if record.head_kind is not net.head_kind:
            net = replace_head(net, record.head_kind, seed=0)
    try:
        net.load_state_dict(record.parameters)
    except RuntimeError as e:
        raise CheckpointError(f"체크포인트 파라미터가 {record.spec.name} 구조와 맞지 않습니다: {e}") from e
    return net
