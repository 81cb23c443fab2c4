"""Degradation synthesis, metrics, image I/O and the denoise/deblur runs."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatch, UnsupportedFormat
from .operators import Convolution, Gradient, IdentityForward, as_image, motion_blur_kernel
from .solvers import PrimalDualParams, joint_solve, posterior_refit, solve_biased

RNG_ALGORITHM = "PCG64"
PSNR_CAP = 99.0
METRICS_HEADER = "task,penalty,lambda,iterations,psnr_input,psnr_biased,psnr_refit"


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def add_gaussian_noise(x, std: float, seed: int) -> np.ndarray:
    """``x`` plus i.i.d. N(0, std^2) noise drawn from a seeded PCG64 stream."""
    if std < 0:
        raise ValueError("noise std must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    if std == 0:
        return x.copy()
    return x + std * rng_for(seed).standard_normal(x.shape)


def psnr(x, ref, peak: float = 255.0) -> float:
    """PSNR in dB over all pixels and channels pooled; identical inputs give 99."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionMismatch(f"psnr shapes differ: {x.shape} vs {ref.shape}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(peak ** 2 / mse))


def synthetic_color_squares(h: int = 64, w: int = 64, seed: int = 0, n_rect: int = 6) -> np.ndarray:
    """Piecewise-constant RGB test image: axis-aligned rectangles on a flat background.

    Colors are integers in [0, 255], so the image survives an 8-bit round trip.
    """
    if h < 16 or w < 16:
        raise ValueError("synthetic image needs h, w >= 16")
    rng = rng_for(seed)
    img = np.empty((h, w, 3))
    colors = []

    def fresh_color():
        # keep colors well apart so every region is a distinct level set
        while True:
            c = rng.integers(20, 236, size=3).astype(np.float64)
            if all(np.abs(c - o).max() >= 40 for o in colors):
                colors.append(c)
                return c

    img[:] = fresh_color()
    for _ in range(n_rect):
        rh = int(rng.integers(h // 6, h // 2))
        rw = int(rng.integers(w // 6, w // 2))
        r0 = int(rng.integers(1, h - rh))
        c0 = int(rng.integers(1, w - rw))
        img[r0:r0 + rh, c0:c0 + rw] = fresh_color()
    return img


def load_png(path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG as a float64 ``(h, w, c)`` array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            if im.format != "PNG":
                raise UnsupportedFormat(f"{path} is not a PNG file")
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise UnsupportedFormat(f"{path}: only 8-bit images are supported (mode {mode})")
            if mode in ("L", "1"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)[:, :, None]
            elif mode == "LA":
                arr = np.asarray(im.convert("L"), dtype=np.float64)[:, :, None]
            elif mode in ("RGB", "RGBA", "P", "PA"):
                arr = np.asarray(im.convert("RGB"), dtype=np.float64)
            else:
                raise UnsupportedFormat(f"{path}: unsupported PNG mode {mode}")
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: not a readable image") from exc
    except (UnsupportedFormat, OSError):
        raise
    except Exception as exc:  # Pillow raises assorted errors on corrupt files
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    return arr


def to_uint8(x) -> np.ndarray:
    return np.clip(np.rint(np.asarray(x, dtype=np.float64)), 0, 255).astype(np.uint8)


def save_png(path, x) -> None:
    """Write an image as 8-bit PNG, clamping to [0, 255] and rounding."""
    x = as_image(x)
    if x.shape[2] not in (1, 3):
        raise UnsupportedFormat(f"cannot save {x.shape[2]}-channel image as PNG")
    data = to_uint8(x)
    img = Image.fromarray(data[:, :, 0], mode="L") if data.shape[2] == 1 else Image.fromarray(data, mode="RGB")
    img.save(Path(path), format="PNG")


@dataclass
class ExperimentConfig:
    task: str = "denoise"
    noise_std: float = 20.0
    lambda_factor: float = 4.3
    penalty: str = "sd"
    tau: float = 0.25
    sigma: float = 1.0 / 6.0
    theta: float = 1.0
    iterations: int = 1000
    seed: int = 0
    mode: str = "joint"
    support_rule: str = "strict"
    blur_length: int = 9
    blur_angle: float = 45.0
    input: Optional[str] = None
    synthetic: Optional[str] = None  # "HxW"
    rng: str = RNG_ALGORITHM

    def __post_init__(self):
        if self.task not in ("denoise", "deblur", "refit"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.mode not in ("joint", "posterior"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.noise_std < 0 or not self.lambda_factor > 0:
            raise ValueError("noise_std must be >= 0 and lambda_factor > 0")
        if (self.input is None) == (self.synthetic is None):
            raise ValueError("exactly one of input / synthetic must be given")

    @property
    def lam(self) -> float:
        return self.lambda_factor * self.noise_std

    def params(self) -> PrimalDualParams:
        return PrimalDualParams(lam=self.lam, tau=self.tau, sigma=self.sigma,
                                theta=self.theta, iterations=self.iterations)

    def to_text(self) -> str:
        lines = [f"{f.name}={getattr(self, f.name)!r}" for f in fields(self)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        import ast
        kw = {}
        names = {f.name for f in fields(cls)}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in names:
                raise ValueError(f"unknown config key {key!r}")
            kw[key] = ast.literal_eval(val.strip())
        return cls(**kw)


def parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise ValueError(f"size must look like HxW, got {text!r}") from None
    return h, w


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    clean: Optional[np.ndarray]
    observed: np.ndarray
    biased: np.ndarray
    refit: np.ndarray
    psnr_input: float
    psnr_biased: float
    psnr_refit: float

    def metrics_row(self) -> str:
        c = self.config
        return (f"{c.task},{c.penalty},{c.lam!r},{c.iterations},"
                f"{self.psnr_input:.6f},{self.psnr_biased:.6f},{self.psnr_refit:.6f}")


def forward_operator(config: ExperimentConfig, shape):
    if config.task == "deblur":
        return Convolution(motion_blur_kernel(config.blur_length, config.blur_angle), shape)
    return IdentityForward(shape)


def degrade(config: ExperimentConfig, clean) -> np.ndarray:
    clean = as_image(clean)
    phi = forward_operator(config, clean.shape)
    return add_gaussian_noise(phi.apply(clean), config.noise_std, config.seed)


def restore(config: ExperimentConfig, observed):
    """Biased and refitted estimates from an observed image."""
    observed = as_image(observed)
    phi = forward_operator(config, observed.shape)
    gamma = Gradient(observed.shape)
    params = config.params()
    if config.mode == "joint":
        res = joint_solve(phi, gamma, observed, params, config.penalty, config.support_rule)
        return res.xhat, res.xtilde
    bia = solve_biased(phi, gamma, observed, params)
    ref = posterior_refit(phi, gamma, observed, params, config.penalty, bia.xhat, bia.zhat, bia.vhat)
    return bia.xhat, ref.xtilde


def source_image(config: ExperimentConfig) -> np.ndarray:
    if config.synthetic is not None:
        h, w = parse_size(config.synthetic)
        return synthetic_color_squares(h, w, config.seed)
    return load_png(config.input)


def run_experiment(config: ExperimentConfig, clean=None) -> ExperimentResult:
    """Degrade (unless the task is ``refit``), restore and score.

    For ``refit`` the source image is already the observation; PSNRs are then
    measured against it.
    """
    src = source_image(config) if clean is None else as_image(clean)
    if config.task == "refit":
        observed, ref = src, src
    else:
        observed, ref = degrade(config, src), src
    biased, refit = restore(config, observed)
    return ExperimentResult(config, src, observed, biased, refit,
                            psnr(observed, ref), psnr(biased, ref), psnr(refit, ref))


OUTPUT_FILES = ("noisy.png", "biased.png", "refit.png", "metrics.csv", "config.txt")


def write_outputs(result: ExperimentResult, out_dir, force: bool = False) -> Path:
    out = Path(out_dir)
    existing = [n for n in OUTPUT_FILES if (out / n).exists()]
    if existing and not force:
        raise FileExistsError(f"{out} already holds {', '.join(existing)}; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    save_png(out / "noisy.png", result.observed)
    save_png(out / "biased.png", result.biased)
    save_png(out / "refit.png", result.refit)
    (out / "metrics.csv").write_text(METRICS_HEADER + "\n" + result.metrics_row() + "\n")
    (out / "config.txt").write_text(result.config.to_text())
    return out


__all__ = [
    "ExperimentConfig", "ExperimentResult", "METRICS_HEADER", "RNG_ALGORITHM",
    "add_gaussian_noise", "psnr", "synthetic_color_squares", "load_png", "save_png",
    "run_experiment", "write_outputs", "degrade", "restore",
]
