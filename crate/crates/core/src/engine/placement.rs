//! Item-memory placement across DBCs 0..=8.
//!
//! With the cluster at home alignment, location 0 sits under the low port
//! and location `trd - 1` under the high port. The nine most frequent
//! symbols go to location 0 of each DBC, the next nine to location
//! `trd - 1`, and the last nine to location `trd`, one step past the high
//! port. Fetching always aligns to the nearer port, so a DBC only ever
//! rests at home or one step away from it and no fetch needs more than one
//! shift.

use serde::{Deserialize, Serialize};

use super::{EngineError, Result, IM_DBCS};
use crate::corpus::{Symbol, ALPHABET};

const TRD: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImSlot {
    pub dbc: usize,
    pub location: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImPlacement {
    /// Slot of each symbol, indexed by symbol.
    slots: Vec<ImSlot>,
    /// Frequency rank of each symbol (0 = most frequent).
    ranks: Vec<usize>,
}

fn slot_for_rank(rank: usize) -> ImSlot {
    let location = match rank / IM_DBCS {
        0 => 0,
        1 => TRD - 1,
        _ => TRD,
    };
    ImSlot {
        dbc: rank % IM_DBCS,
        location,
    }
}

/// Ranks symbols by descending frequency, ties in alphabet order (space
/// last), and assigns slots by rank.
pub fn plan_placement(frequencies: &[u64]) -> Result<ImPlacement> {
    if frequencies.len() != ALPHABET {
        return Err(EngineError::Config(format!(
            "frequency table covers {} symbols, expected {ALPHABET}",
            frequencies.len()
        )));
    }
    let mut order: Vec<usize> = (0..ALPHABET).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(frequencies[i]), i));
    let mut ranks = vec![0; ALPHABET];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r;
    }
    let slots = ranks.iter().map(|&r| slot_for_rank(r)).collect();
    Ok(ImPlacement { slots, ranks })
}

impl ImPlacement {
    pub fn uniform() -> Self {
        plan_placement(&[0; ALPHABET]).expect("table has every symbol")
    }

    pub fn slot(&self, s: Symbol) -> ImSlot {
        self.slots[s.index()]
    }

    pub fn rank(&self, s: Symbol) -> usize {
        self.ranks[s.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, ImSlot)> + '_ {
        Symbol::all().map(|s| (s, self.slot(s)))
    }

    /// Free rows of DBCs 0..=8, DBC-major, location ascending.
    pub fn spare_rows(&self, domains: usize) -> Vec<ImSlot> {
        (0..IM_DBCS)
            .flat_map(|dbc| (0..domains).map(move |location| ImSlot { dbc, location }))
            .filter(|s| !self.slots.contains(s))
            .collect()
    }
}
