"""Lattice and N-best rescoring toolkit for ASR error correction work.

Builds and manipulates hypothesis lattices and N-best lists, retokenizes
lattices between sub-word vocabularies, decodes with ASR/correction-model
score interpolation, and evaluates WER and oracle WER.
"""

__version__ = "0.1.0"

from .core import (Arc, Hypothesis, Lattice, LatticePath, NBestList, PathSet,
                   TERMINAL, ValidationReport, assemble_text, best_path,
                   enumerate_paths, topo_order, validate_lattice)
from .decode import (DecodeResult, SweepResult, SweepUtt, decode_lattice,
                     decode_unconstrained, interpolate, rescore_nbest,
                     sweep_lambda)
from .errors import (CycleError, EmptyReferenceError, LatrecError,
                     NoHypothesisError, ParseError, ProtocolError,
                     RemoteError, SegmentationError, TokenizerError,
                     TransportError, ValidationError)
from .external import ExternalScorer, external_scorer_client
from .metrics import (Alignment, CorpusReport, WerStats, align, corpus_report,
                      filter_pairs, oracle_wer_lattice, oracle_wer_nbest, wer)
from .retokenize import (BoundaryConvention, GreedyVocabTokenizer,
                         WordTokenizer, bpe_to_word, path_words,
                         word_to_plm_bpe)
from .scoring import (EncoderInput, EmissionModelScorer, NgramScorer, Scorer,
                      build_encoder_input, run_scorer_conformance)
from .simulate import (BeamConfig, EmissionModel, MergeState, NoisyChannelModel,
                       TableModel, ToyModels, UniformModel, beam_search,
                       make_toy_models, merged_beam_search, simulate_corpus)

__all__ = [name for name in dir() if not name.startswith("_")]
