// Copyright 2026 The rollout-sprt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Corpus { path: PathBuf, message: String },
    #[error("instance {instance_id}: {source}")]
    Instance {
        instance_id: String,
        #[source]
        source: rollout_sprt_core::Error,
    },
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl HarnessError {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Io { .. } | Self::Corpus { .. } | Self::Instance { .. } => 2,
            Self::Invariant(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<rollout_sprt_core::Error> for HarnessError {
    fn from(e: rollout_sprt_core::Error) -> Self {
        match e {
            rollout_sprt_core::Error::Config(msg) => Self::Config(msg),
            other => Self::Invariant(other.to_string()),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
