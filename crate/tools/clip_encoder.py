#!/usr/bin/env python3
"""JSON-lines adapter exposing a pretrained CLIP ViT-B/32 to scenestyle.

Reads one request per line on stdin and writes one reply per line on stdout.
See `scenestyle::losses::ProcessBackend` for the protocol.

    python3 tools/clip_encoder.py --weights /path/to/clip-vit-base-patch32
"""

import argparse
import json
import sys

import torch
import torch.nn.functional as F
from transformers import CLIPModel, CLIPTokenizer

MEAN = torch.tensor([0.48145466, 0.4578275, 0.40821073]).view(1, 3, 1, 1)
STD = torch.tensor([0.26862954, 0.26130258, 0.27577711]).view(1, 3, 1, 1)


class Encoder:
    def __init__(self, weights, device):
        torch.use_deterministic_algorithms(True)
        self.device = device
        self.model = CLIPModel.from_pretrained(weights).to(device).eval().double()
        self.tokenizer = CLIPTokenizer.from_pretrained(weights)
        self.size = self.model.config.vision_config.image_size
        self.dim = self.model.config.projection_dim
        for p in self.model.parameters():
            p.requires_grad_(False)

    def _image(self, req, requires_grad):
        w, h = req["width"], req["height"]
        px = torch.tensor(req["pixels"], dtype=torch.float64, device=self.device)
        px = px.view(h, w, 3).requires_grad_(requires_grad)
        x = px.permute(2, 0, 1).unsqueeze(0)
        if (h, w) != (self.size, self.size):
            x = F.interpolate(x, size=(self.size, self.size), mode="bilinear", align_corners=False)
        x = (x - MEAN.to(x)) / STD.to(x)
        e = self.model.get_image_features(pixel_values=x)[0]
        return px, e / e.norm()

    def handle(self, req):
        op = req.get("op")
        if op == "info":
            return {"name": "clip-vit-b32", "dim": self.dim}
        if op == "embed_text":
            tok = self.tokenizer([req["text"]], padding=True, return_tensors="pt").to(self.device)
            with torch.no_grad():
                e = self.model.get_text_features(**tok)[0]
            return {"embedding": (e / e.norm()).tolist()}
        if op == "embed_image":
            with torch.no_grad():
                _, e = self._image(req, False)
            return {"embedding": e.tolist()}
        if op == "image_vjp":
            px, e = self._image(req, True)
            g = torch.tensor(req["grad"], dtype=torch.float64, device=self.device)
            (grad,) = torch.autograd.grad(e, px, g)
            return {"grad": grad.reshape(-1).tolist()}
        return {"error": f"unknown op {op!r}"}


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--weights", required=True)
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args()
    try:
        encoder = Encoder(args.weights, args.device)
    except Exception as exc:  # reported through the protocol, then exit
        for _ in sys.stdin:
            print(json.dumps({"error": f"cannot load encoder: {exc}"}), flush=True)
        return
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            reply = encoder.handle(json.loads(line))
        except Exception as exc:
            reply = {"error": str(exc)}
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
