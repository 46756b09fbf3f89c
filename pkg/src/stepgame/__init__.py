"""StepGame: multi-hop spatial reasoning benchmark generation, certification and TP-MANN kernels."""

__version__ = "0.1.0"

from .generator import Chain, Question, Sample, count_samples, pick_question, realize, sample_chain
from .oracle import certify, solve
from .spatial import AnswerLabel, Coord, Direction, RelationTriple, invert, label_displacement, offset, place_chain
from .templates import TemplateBank, load_bank, parse, render

__all__ = [
    "AnswerLabel",
    "Chain",
    "Coord",
    "Direction",
    "Question",
    "RelationTriple",
    "Sample",
    "TemplateBank",
    "certify",
    "count_samples",
    "invert",
    "label_displacement",
    "load_bank",
    "offset",
    "parse",
    "pick_question",
    "place_chain",
    "realize",
    "render",
    "sample_chain",
    "solve",
]
