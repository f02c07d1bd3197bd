import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from revcoref.fixtures import running_example_doc, running_example_spans
from revcoref.model import CorefScorer, ModelConfig
from revcoref.span_repr import EncoderConfig, TokenVocab
from revcoref.subtok import SubTokenizer


@pytest.fixture(scope="session")
def subtok():
    return SubTokenizer.bundled()


@pytest.fixture()
def example_doc():
    return running_example_doc()


@pytest.fixture()
def example_spans(example_doc):
    return running_example_spans(example_doc)


def tiny_model(seed=0, **config_kwargs):
    """A small double-precision scorer over the example vocabulary."""
    defaults = dict(
        encoder=EncoderConfig(embed_dim=6, lookup_width=5, bucket_embed_dim=4),
        ffn_hidden=7,
        dropout=0.0,
    )
    defaults.update(config_kwargs)
    config = ModelConfig(**defaults)
    torch.manual_seed(seed)
    doc = running_example_doc()
    vocab = TokenVocab.build(
        [doc], SubTokenizer.bundled(),
        extra_phrases=["clock", "alarm", "hang", "set an alarm", "keeping time"],
    )
    return CorefScorer(config, vocab=vocab)
