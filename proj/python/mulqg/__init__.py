"""Multi-hop question generation over entity graphs (native core)."""

import json as _json

from . import _mulqg
from ._mulqg import ConfigError, DataError, MulqgError, bfs_mask, maxout_copy_scores, tokenize

__all__ = [
    "ConfigError",
    "DataError",
    "MulqgError",
    "bfs_mask",
    "corpus_metrics",
    "generate",
    "generate_data",
    "grad_check",
    "maxout_copy_scores",
    "normalize_config",
    "tokenize",
    "train",
]


def corpus_metrics(hypotheses, references):
    """Corpus BLEU-1..4 and ROUGE-L over aligned token lists."""
    return _json.loads(_mulqg.corpus_metrics(hypotheses, references))


def generate_data(seed, count, out, pool=50, distractors=0, lexicon=""):
    """Write a synthetic dataset (JSONL) and its lexicon; returns the paths."""
    return _json.loads(_mulqg.generate_data(seed, count, pool, distractors, str(out), str(lexicon)))


def normalize_config(config):
    """Validate a config dict and return it with every default filled in."""
    return _json.loads(_mulqg.normalize_config(_json.dumps(config)))


def train(config_path):
    """Train from a config file; returns step counts, checkpoint paths and the epoch log."""
    return _json.loads(_mulqg.train(str(config_path)))


def generate(checkpoint, data, beam=0, max_len=0):
    """Beam-search questions for every example; 0 selects the checkpoint's setting."""
    return _json.loads(_mulqg.generate(str(checkpoint), str(data), beam, max_len))


def grad_check(module="all"):
    """Finite-difference gradient check of the model's parameter groups."""
    return _json.loads(_mulqg.grad_check(module))
