"""Pinned online-adaptation configs, tuned on the validation recovery session
(grammar words add/orange/red/1st/3rd/5th/even corrupted) with k = 7.

Benchmarks and the CLI use these when the caller does not supply a config;
re-tune with online.tune_online against your own checkpoint if you change
the offline recipe.
"""

from .online import AdaptConfig

# keyed by (reuse, adapt)
TUNED = {
    ("all", "embeddings"): AdaptConfig(
        reuse="all", adapt="embeddings", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-4, selection="greedy"),
    ("all", "newwords"): AdaptConfig(
        reuse="all", adapt="newwords", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-4, selection="greedy"),
    ("all", "encoder"): AdaptConfig(
        reuse="all", adapt="encoder", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-3, selection="greedy"),
    ("all", "all"): AdaptConfig(
        reuse="all", adapt="all", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-3, selection="greedy"),
    ("dec", "encoder"): AdaptConfig(
        reuse="dec", adapt="encoder", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-3, selection="greedy"),
    ("dec", "all"): AdaptConfig(
        reuse="dec", adapt="all", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-3, selection="greedy"),
    ("none", "all"): AdaptConfig(
        reuse="none", adapt="all", k=7, optimizer="adam", lr=1e-2,
        steps=200, l2=1e-3, selection="greedy"),
}


def tuned_config(reuse, adapt, **overrides) -> AdaptConfig:
    from dataclasses import replace

    return replace(TUNED[(reuse, adapt)], **overrides)
