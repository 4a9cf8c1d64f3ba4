from torch import nn


def same_padding(kernel: int, dilation: int = 1, stride: int = 1) -> int:
    """출력 크기가 입력/stride 가 되도록 하는 최소 패딩 (입력이 stride 의 배수일 때)"""
    return (dilation * (kernel - 1) + 2 - stride) // 2


class ConvNormAct(nn.Sequential):
    """Conv → InstanceNorm → LeakyReLU"""

    def __init__(self, in_channels: int, out_channels: int, kernel: int = 3, stride: int = 1,
                 dilation: int = 1, norm: bool = True, act: bool = True):
        layers = [nn.Conv2d(in_channels, out_channels, kernel, stride=stride,
                            padding=same_padding(kernel, dilation, stride), dilation=dilation)]
        if norm:
            # 배치와 무관한 정규화 (배치 1 추론 허용)
            layers.append(nn.InstanceNorm2d(out_channels, affine=True))
        if act:
            layers.append(nn.LeakyReLU(0.2))
        super().__init__(*layers)


class ResidualBlock(nn.Module):
    """두 개의 dilated conv 로 구성된 잔차 블록"""

    def __init__(self, channels: int, kernel: int = 3, dilation: int = 1):
        super().__init__()
        self.conv1 = ConvNormAct(channels, channels, kernel, dilation=dilation)
        self.conv2 = ConvNormAct(channels, channels, kernel, dilation=dilation, act=False)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        return self.act(x + self.conv2(self.conv1(x)))


def init_weights(module: nn.Module, gain: float = 0.02):
    """conv 가중치 N(0, 0.02), 정규화 스케일 N(1, 0.02), bias 0 으로 초기화"""
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.normal_(m.weight, 0.0, gain)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            nn.init.normal_(m.weight, 1.0, gain)
            nn.init.zeros_(m.bias)
