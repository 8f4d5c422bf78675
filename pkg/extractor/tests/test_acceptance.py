"""Secondary acceptance: the extractor feeds the primary toolchain end to end."""

import json
import subprocess
import sys

import numpy as np
import pytest
import torch

from svib_extractor.capture import Extractor, ExtractorConfig, read_corpus

from test_extractor import write_corpus


def swinvib(*argv):
    result = subprocess.run(
        [sys.executable, "-m", "swinvib.cli", *argv],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, f"swinvib failed: {result.stderr}"
    return result.stdout


def test_criterion_11_extractor_round_trip(tmp_path):
    # tiny local backbone, 4 layers (<= 6), 10 corpus samples
    extractor = Extractor(ExtractorConfig(seed=23, tiny_layers=4))
    corpus = write_corpus(tmp_path / "corpus.jsonl", n=10)
    manifest, report = extractor.extract_training_features(
        read_corpus(corpus), tmp_path / "features")
    assert report["processed"] == 10

    # attention rows sum to 1 within 1e-4
    ids, _ = extractor.tokenizer.encode_tokens([f"w{i}" for i in range(7)])
    for att in extractor._attentions(ids):
        np.testing.assert_allclose(att.sum(axis=-1), 1.0, atol=1e-4)

    # emitted SVF1 files pass the primary validator
    out = swinvib("validate", "--path", str(manifest))
    assert out.startswith("ok:")

    # the files train through the primary train command without error
    swinvib("train", "--manifest", str(manifest), "--out", str(tmp_path / "models"),
            "--epochs", "2", "--batch-size", "4", "--seed", "0")
    models = json.loads((tmp_path / "models" / "models.json").read_text())
    assert len(models["checkpoints"]) == 4

    # forced-token answer uncertainty matches -ln p of the model's own distribution
    prompt = "what is the answer"
    bos = extractor.tokenizer.bos_token_id
    prompt_ids = [bos] + extractor.tokenizer.encode_text(prompt)
    with torch.no_grad():
        logits = extractor.model(torch.tensor([prompt_ids])).logits[0, -1].double()
    probs = torch.softmax(logits, dim=-1)
    forced = "zebra"
    forced_id = extractor.tokenizer.token_id(forced)
    result = extractor.answer_logprobs(prompt, answer=forced)
    psi = -float(np.mean(result["logprobs"]))
    assert psi == pytest.approx(-float(torch.log(probs[forced_id])), abs=1e-6)

    print("\n[criterion 11] PASS: extractor files validate and train through the "
          f"primary CLI (4 layers, 10 samples); attention rows sum to 1; "
          f"forced-token psi {psi:.4f} matches -ln p within 1e-6")
