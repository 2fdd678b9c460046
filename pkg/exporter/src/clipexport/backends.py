"""Embedding backends.

Two implementations of the same small protocol:

- HFClipBackend wraps a locally available CLIP checkpoint through
  `transformers` (imported lazily, so the package works without torch).
- ColorWordsBackend is a fully offline stand-in whose "model" maps images
  to their mean RGB and prompts to the RGB of any color word they contain.
  It exists so the whole export path (folder walking, decoding, file
  emission, downstream round trip) can run and be tested without model
  weights, while still giving above-chance zero-shot accuracy on images
  whose dominant color matches their class name.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, ImageColor

from .errors import ModelUnavailableError, JobError


class ColorWordsBackend:
    """Offline backend: 4-d embeddings from mean RGB / named-color RGB.

    The constant fourth component keeps rows away from zero norm (an all
    black image would otherwise be degenerate) and gives unrelated colors a
    nonzero baseline similarity, which is what a real encoder does too.
    """

    name = "color-words"
    dim = 4

    def embed_images(self, images: list[Image.Image]) -> np.ndarray:
        out = np.empty((len(images), self.dim))
        for k, img in enumerate(images):
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
            out[k, :3] = rgb.mean(axis=(0, 1))
            out[k, 3] = 0.5
        return out

    def embed_texts(self, prompts: list[str]) -> np.ndarray:
        out = np.empty((len(prompts), self.dim))
        for k, prompt in enumerate(prompts):
            rgb = self._color_of(prompt)
            out[k, :3] = rgb
            out[k, 3] = 0.5
        return out

    @staticmethod
    def _color_of(prompt: str) -> np.ndarray:
        for word in prompt.replace(".", " ").replace(",", " ").split():
            try:
                r, g, b = ImageColor.getrgb(word.lower())
            except ValueError:
                continue
            return np.array([r, g, b], dtype=np.float64) / 255.0
        raise JobError(
            f"color-words backend found no recognizable color name in "
            f"prompt {prompt!r}"
        )


class HFClipBackend:
    """CLIP via transformers. Requires the checkpoint to be available
    locally (no downloads are attempted)."""

    def __init__(self, model_id: str, batch_size: int = 16):
        try:
            import torch  # noqa: F401
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as e:
            raise ModelUnavailableError(
                f"transformers/torch not installed: {e}") from e
        try:
            self.model = CLIPModel.from_pretrained(model_id,
                                                   local_files_only=True)
            self.processor = CLIPProcessor.from_pretrained(
                model_id, local_files_only=True)
        except Exception as e:
            raise ModelUnavailableError(
                f"model {model_id!r} not available locally: {e}") from e
        self.model.eval()
        self.name = model_id
        self.batch_size = batch_size

    def embed_images(self, images):
        import torch

        chunks = []
        with torch.no_grad():
            for lo in range(0, len(images), self.batch_size):
                inputs = self.processor(
                    images=images[lo:lo + self.batch_size],
                    return_tensors="pt")
                feats = self.model.get_image_features(**inputs)
                chunks.append(feats.cpu().numpy().astype(np.float64))
        return np.concatenate(chunks, axis=0)

    def embed_texts(self, prompts):
        import torch

        with torch.no_grad():
            inputs = self.processor(text=prompts, return_tensors="pt",
                                    padding=True)
            feats = self.model.get_text_features(**inputs)
        return feats.cpu().numpy().astype(np.float64)


def make_backend(model_id: str):
    """Backend factory keyed on the model id."""
    if model_id == ColorWordsBackend.name:
        return ColorWordsBackend()
    return HFClipBackend(model_id)
