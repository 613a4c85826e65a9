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
//! Seed derivation for isolated per-instance random streams.
//!
//! Every stream is keyed by `(global seed, instance id, purpose)`, so an
//! instance's votes never depend on how many other instances exist, in which
//! order they run, or on which thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    /// Drawing the instance's own parameters (true answer, p0).
    Instance,
    /// Votes for the fixed-budget majority-vote arm.
    FixedArm,
    /// Votes for the adaptive (sequential test) arm.
    AdaptiveArm,
    /// Votes drawn from the policy in closed-loop round `r`.
    PolicyRound(u32),
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            Self::Instance => 0x1,
            Self::FixedArm => 0x2,
            Self::AdaptiveArm => 0x3,
            Self::PolicyRound(r) => 0x100 + u64::from(r),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derives the 64-bit seed of one stream.
pub fn stream_seed(global_seed: u64, instance_id: &str, purpose: StreamPurpose) -> u64 {
    let a = splitmix64(global_seed);
    let b = splitmix64(a ^ fnv1a(instance_id.as_bytes()));
    splitmix64(b ^ purpose.tag())
}

/// Builds the generator for one stream.
pub fn stream_rng(global_seed: u64, instance_id: &str, purpose: StreamPurpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(global_seed, instance_id, purpose))
}
