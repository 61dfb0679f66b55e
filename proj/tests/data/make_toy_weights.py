"""Writes the toy-encoder fixtures used by the backbone tests.

toy_backbone_4_8_16_16.pt   state_dict as a plain dict in torch.save format
toy_backbone_expected.pt    {"input", "f2", "f3", "f4", "f5"} computed in eval mode
"""
import torch
from torch import nn


class Stage(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, 3, stride=2, padding=1, bias=False)
        self.bn = nn.BatchNorm2d(cout)

    def forward(self, x):
        return torch.relu(self.bn(self.conv(x)))


class Toy(nn.Module):
    def __init__(self, channels):
        super().__init__()
        widths = [channels[0], channels[0], channels[1], channels[2], channels[3]]
        cin = 3
        for i, w in enumerate(widths):
            setattr(self, f"stage{i + 1}", Stage(cin, w))
            cin = w

    def forward(self, x):
        outs = []
        for i in range(5):
            x = getattr(self, f"stage{i + 1}")(x)
            outs.append(x)
        return outs[1:]


def main():
    torch.manual_seed(7)
    net = Toy([4, 8, 16, 16])
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, nn.BatchNorm2d):
                m.running_mean.uniform_(-0.2, 0.2)
                m.running_var.uniform_(0.5, 1.5)
                m.weight.uniform_(0.5, 1.5)
                m.bias.uniform_(-0.1, 0.1)
    net.eval()
    torch.save(dict(net.state_dict()), "toy_backbone_4_8_16_16.pt")
    x = torch.rand(1, 3, 64, 64)
    with torch.no_grad():
        f2, f3, f4, f5 = net(x)
    torch.save({"input": x, "f2": f2, "f3": f3, "f4": f4, "f5": f5}, "toy_backbone_expected.pt")


if __name__ == "__main__":
    main()
