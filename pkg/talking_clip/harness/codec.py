"""Toy image codec standing in for a pretrained VAE.

An image is split into p x p patches, one per latent position, and every patch is projected onto a
fixed orthonormal basis. The leading basis vectors are the per-colour patch means, so the first three
latent channels are a downsampled colour image. Decoding applies the transpose, which makes
`encode(decode(z)) == z` for any latent.
"""

import numpy as np
import torch
from einops import rearrange
from PIL import Image

from talking_clip.core.config import ModelConfig
from talking_clip.core.errors import ShapeMismatch


def patch_basis(patch_size: int, channels: int, seed: int = 0) -> torch.Tensor:
    """[3 p^2, channels] orthonormal columns, the first three being the per-colour means."""
    dim = 3 * patch_size**2
    if not 0 < channels <= dim:
        raise ShapeMismatch(f"latent channels must be in [1, {dim}] for {patch_size}x{patch_size} patches")
    means = torch.zeros(dim, 3, dtype=torch.float64)
    for colour in range(3):
        means[colour::3, colour] = 1.0 / patch_size
    generator = torch.Generator().manual_seed(seed)
    rest = torch.randn(dim, dim - 3, generator=generator, dtype=torch.float64)
    q, r = torch.linalg.qr(torch.cat([means, rest], dim=1))
    q = q * torch.sign(torch.diagonal(r)).unsqueeze(0)
    return q[:, :channels].contiguous()


class PatchCodec:
    def __init__(self, image_size: int, latent_size: int, channels: int, seed: int = 0) -> None:
        if latent_size <= 0 or image_size % latent_size != 0:
            raise ShapeMismatch(f"image size {image_size} is not a multiple of latent size {latent_size}")
        self.image_size = image_size
        self.latent_size = latent_size
        self.patch_size = image_size // latent_size
        self.basis = patch_basis(self.patch_size, channels, seed)

    @classmethod
    def from_config(cls, cfg: ModelConfig) -> "PatchCodec":
        return cls(cfg.image_size, cfg.latent_height, cfg.latent_channels, cfg.seed)

    def encode(self, image: np.ndarray) -> torch.Tensor:
        """uint8 [H, W, 3] image -> float32 [C, h, w] latent."""
        if image.shape != (self.image_size, self.image_size, 3):
            raise ShapeMismatch(f"image must be {(self.image_size, self.image_size, 3)}, got {image.shape}")
        pixels = torch.from_numpy(image.astype(np.float64) / 127.5 - 1.0)
        patches = rearrange(pixels, "(h p1) (w p2) c -> h w (p1 p2 c)", p1=self.patch_size, p2=self.patch_size)
        return rearrange(patches @ self.basis, "h w c -> c h w").to(torch.float32)

    def encode_frames(self, images: np.ndarray) -> torch.Tensor:
        """[N, H, W, 3] -> [N, C, h, w]."""
        return torch.stack([self.encode(image) for image in images])

    def decode(self, latent: torch.Tensor) -> torch.Tensor:
        """[C, h, w] latent -> float64 [H, W, 3] pixels in the [-1, 1] scale, unclipped."""
        if latent.dim() != 3 or latent.shape[0] != self.basis.shape[1]:
            raise ShapeMismatch(f"latent must be [{self.basis.shape[1]}, h, w], got {tuple(latent.shape)}")
        patches = rearrange(latent.to(torch.float64), "c h w -> h w c") @ self.basis.T
        return rearrange(patches, "h w (p1 p2 c) -> (h p1) (w p2) c", p1=self.patch_size, p2=self.patch_size)

    def decode_image(self, latent: torch.Tensor) -> Image.Image:
        pixels = (self.decode(latent).clamp(-1.0, 1.0) + 1.0) * 127.5
        return Image.fromarray(np.round(pixels.numpy()).astype(np.uint8))


def load_image(path: str, size: int) -> np.ndarray:
    """RGB uint8 [size, size, 3], resized when needed."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        if rgb.size != (size, size):
            rgb = rgb.resize((size, size), Image.Resampling.BICUBIC)
        return np.asarray(rgb, dtype=np.uint8)
