# Copyright 2026 The oosguard Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Mahalanobis-distance intent scoring with out-of-scope rejection."""

from oosguard._core import (
    OOS_LABEL,
    ConfigError,
    DataError,
    Error,
    NumericError,
    Scorer,
    aupr_oos,
    auroc,
    class_means,
    dispersion,
    featurize,
    load_scorer,
    mahalanobis,
    read_emb,
    regularized_inverse,
    shared_covariance,
    synthesize,
    tokenize,
    train,
    write_emb,
)

__all__ = [
    "OOS_LABEL",
    "ConfigError",
    "DataError",
    "Error",
    "NumericError",
    "Scorer",
    "aupr_oos",
    "auroc",
    "class_means",
    "dispersion",
    "featurize",
    "load_scorer",
    "mahalanobis",
    "read_emb",
    "regularized_inverse",
    "shared_covariance",
    "synthesize",
    "tokenize",
    "train",
    "write_emb",
]
