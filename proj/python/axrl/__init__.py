# Copyright 2026 The axrl Authors
# SPDX-License-Identifier: Apache-2.0
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the axrl C++ core.

Arrays are row-per-sample. Configs are plain dicts holding the same keys as the
JSON configs accepted by the ``axrl`` command line tool.
"""

import json

from . import _core
from ._core import (
    Agent,
    BonusModel,
    Dataset,
    DimensionError,
    Environment,
    FormatError,
    NonFiniteError,
    ParameterError,
    TabularMdp,
    UntrainedModelError,
    auc,
    delta_b,
    evaluate_scripted,
    generate_dataset,
    load_bonus,
    load_dataset,
    normalize_rewards,
    ood_actions,
    random_bonus,
    random_mdp,
    save_dataset,
    verify_dp,
    vi_kl_regularized,
    vi_naive_antiexplore,
    vi_penalized_bootstrap,
    vi_plain,
)

__version__ = "0.1.0"


def metadata(dataset):
    """Dataset header as a dict."""
    return json.loads(dataset.metadata)


def train_bonus(dataset, kind="cvae", config=None):
    """Train a bonus model at desk scale; ``config`` overrides individual fields.

    Returns ``(model, losses)`` where ``losses`` are the window-averaged training losses.
    """
    return _core.train_bonus(dataset, kind, json.dumps(config or {}))


def train_agent(dataset, bonus=None, config=None):
    """Train TD3 with the given bonus (``None`` for plain TD3; set both betas to 0).

    Returns ``(agent, metrics_csv)``.
    """
    return _core.train_agent(dataset, bonus, json.dumps(config or {}))


def discrimination_report(bonus, dataset, modes=("uniform", "noise:0.1", "noise:0.5"), seed=0):
    return json.loads(_core.discrimination_report(bonus, dataset, list(modes), seed))


def run_cli(*args):
    """Run an ``axrl`` subcommand in-process; returns ``(exit_code, stdout, stderr)``."""
    return _core.run_cli([str(a) for a in args])
