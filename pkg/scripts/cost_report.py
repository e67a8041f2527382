"""Parameter and MAC counts against published reference figures for eight NeXt-TDNN sizes."""

import argparse

from nexttdnn.features import frame_count
from nexttdnn.model import ModelConfig, count_macs, count_params

ROWS = [
    # variant, C, B, reference params (M), reference MACs (G)
    ("ts_convnext_light", 192, 1, 1.6, 0.417),
    ("ts_convnext_light", 128, 3, 1.6, 0.441),
    ("ts_convnext", 192, 1, 1.8, 0.478),
    ("ts_convnext", 128, 3, 1.9, 0.519),
    ("ts_convnext_light", 384, 1, 5.9, 1.609),
    ("ts_convnext_light", 256, 3, 6.0, 1.695),
    ("ts_convnext", 384, 1, 6.7, 1.862),
    ("ts_convnext", 256, 3, 7.1, 2.027),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=float, default=3.0)
    args = ap.parse_args()
    frames = frame_count(int(args.seconds * 16000))
    print(f"{'model':<26} {'params':>8} {'ref':>6} {'dev':>7}   {'MACs':>7} {'ref':>6} {'dev':>7}")
    for variant, C, B, p_ref, m_ref in ROWS:
        cfg = ModelConfig(C=C, B=B, variant=variant)
        p = count_params(cfg) / 1e6
        m = count_macs(cfg, frames) / 1e9
        name = f"NeXt-TDNN{'-l' if cfg.light else ''} (C={C}, B={B})"
        print(f"{name:<26} {p:7.2f}M {p_ref:5.1f}M {p / p_ref - 1:+7.1%}   "
              f"{m:6.3f}G {m_ref:5.3f}G {m / m_ref - 1:+7.1%}")


if __name__ == "__main__":
    main()
