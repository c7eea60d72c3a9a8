//! Similarity search: one subarray per class.
//!
//! Inside a class subarray chunk `j` of the class vector sits in DBC
//! `j mod 14` at location `5 * (j / 14)`, the query chunk right after it
//! and three zero rows after that, so one transverse read over the window
//! XORs class and query. Results go to consecutive rows of DBC 14, whose
//! ones are counted five rows at a time and accumulated one unit at a time
//! into a single decimal counter on the first tracks of DBC 15.

use super::readout::{pack_counters, unpack_counters, DigitSnapshot};
use super::{EngineError, HdcrConfig, Result, SEARCH_COUNTER_DBC, SEARCH_RESULT_DBC};
use crate::cim::{cimop, CimOpKind, CimRequest};
use crate::cost::{EventClass, Phase, PhaseLedger};
use crate::counter::{digits_required, unit_increment_tracks};
use crate::device::{DbcAddr, Device, Port, RowWord};
use crate::hdc::{AssociativeMemory, Hypervector, CHUNK_BITS};

const OPERAND_DBCS: usize = SEARCH_RESULT_DBC;

#[derive(Debug)]
pub struct SearchModule {
    device: Device,
    labels: Vec<String>,
    subarrays: Vec<(usize, usize)>,
    tile: usize,
    chunks: usize,
    trd: usize,
    digits: usize,
    setup: PhaseLedger,
}

impl SearchModule {
    /// Claims one subarray per class after the encoder PGs and writes the
    /// class vectors into them.
    pub fn load(config: &HdcrConfig, am: &AssociativeMemory) -> Result<Self> {
        config.validate()?;
        let g = &config.geometry;
        let chunks = config.chunks();
        let trd = g.trd;
        if chunks > OPERAND_DBCS * (g.domains_per_track / trd) {
            return Err(EngineError::Capacity(format!(
                "{chunks} chunks do not fit one search subarray"
            )));
        }
        if chunks.div_ceil(trd) * trd > g.domains_per_track {
            return Err(EngineError::Capacity(format!(
                "{chunks} result rows do not fit DBC {SEARCH_RESULT_DBC}"
            )));
        }
        if let Some(d) = am.dim() {
            if d != config.dim {
                return Err(EngineError::Config(format!(
                    "memory dimension {d} differs from {}",
                    config.dim
                )));
            }
        }
        let first = config.num_pgs * chunks;
        if first + am.len() > g.total_subarrays() {
            return Err(EngineError::Capacity(format!(
                "{} classes need subarrays {first}..{} of {}",
                am.len(),
                first + am.len(),
                g.total_subarrays()
            )));
        }
        let subarrays = (0..am.len())
            .map(|c| g.subarray_at(first + c))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut m = Self {
            device: Device::new(g.clone())?,
            labels: am.labels().map(str::to_string).collect(),
            subarrays,
            tile: g.cim_tile(),
            chunks,
            trd,
            digits: digits_required(config.dim as u64)?,
            setup: PhaseLedger::new(),
        };
        let classes: Vec<&Hypervector> = am.iter().map(|(_, h)| h).collect();
        m.device.set_phase(Phase::Io);
        let addrs: Vec<Vec<DbcAddr>> = (0..am.len()).map(|c| m.lane(c)).collect();
        let spots: Vec<(usize, usize)> = (0..chunks).map(|j| m.operand_spot(j)).collect();
        m.device.lanes(am.len(), |dev, c| -> Result<()> {
            for (j, &(dbc, loc)) in spots.iter().enumerate() {
                dev.write_at(addrs[c][dbc].at(loc), &classes[c].chunk(j))?;
            }
            dev.set_independent(addrs[c][SEARCH_COUNTER_DBC], true)?;
            Ok(())
        })?;
        m.setup = m.device.take_ledger();
        Ok(m)
    }

    fn lane(&self, c: usize) -> Vec<DbcAddr> {
        let (bank, sub) = self.subarrays[c];
        (0..16).map(|d| DbcAddr::new(bank, sub, self.tile, d)).collect()
    }

    /// (DBC, location) of class chunk `j`; the query chunk follows it.
    fn operand_spot(&self, j: usize) -> (usize, usize) {
        (j % OPERAND_DBCS, self.trd * (j / OPERAND_DBCS))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Cost of writing the class vectors.
    pub fn setup_ledger(&self) -> &PhaseLedger {
        &self.setup
    }

    /// Distance from `query` to every class, in memory order, and the cost
    /// of computing them. Class subarrays run concurrently.
    pub fn search(&mut self, query: &Hypervector) -> Result<(Vec<(String, u32)>, PhaseLedger)> {
        if query.chunks() != self.chunks {
            return Err(EngineError::Config(format!(
                "query has {} chunks, module expects {}",
                query.chunks(),
                self.chunks
            )));
        }
        let addrs: Vec<Vec<DbcAddr>> = (0..self.labels.len()).map(|c| self.lane(c)).collect();
        let spots: Vec<(usize, usize)> = (0..self.chunks).map(|j| self.operand_spot(j)).collect();
        let (trd, digits, chunks) = (self.trd, self.digits, self.chunks);
        let tracks: Vec<usize> = (0..digits).collect();
        let mut counter_mask = RowWord::zeros(CHUNK_BITS);
        tracks.iter().for_each(|&t| counter_mask.set(t, true));

        self.device.set_phase(Phase::Search);
        let distances = self.device.lanes(self.labels.len(), |dev, c| -> Result<u32> {
            let a = &addrs[c];
            let (result, counter) = (a[SEARCH_RESULT_DBC], a[SEARCH_COUNTER_DBC]);
            // reset the counter to zero
            for _ in 0..trd {
                dev.transverse_write_masked(counter, &counter_mask, &RowWord::zeros(CHUNK_BITS))?;
            }
            for (j, &(dbc, loc)) in spots.iter().enumerate() {
                dev.write_at(a[dbc].at(loc + 1), &query.chunk(j))?;
            }
            for (j, &(dbc, loc)) in spots.iter().enumerate() {
                let x = cimop(
                    dev,
                    CimRequest {
                        src: a[dbc].at(loc),
                        size: 2,
                        op: CimOpKind::Xor,
                    },
                )?;
                dev.write_at(result.at(j), &x)?;
            }
            for g in 0..chunks.div_ceil(trd) {
                dev.with_dbc(result, |d, l| d.align_window(g * trd, l))?;
                let counts = dev.tr_read(result)?;
                for k in counts {
                    for _ in 0..k {
                        dev.with_dbc(counter, |d, l| Ok(unit_increment_tracks(d, &tracks, l)))??;
                    }
                }
            }
            let counts = dev.tr_read(counter)?;
            let p = dev.read_row(counter, Port::High)?;
            let snap: Vec<_> = tracks
                .iter()
                .map(|&t| DigitSnapshot::from_sense(counts[t], p.get(t)))
                .collect();
            let rows = pack_counters(&[snap], digits, CHUNK_BITS);
            dev.set_phase(Phase::Io);
            for _ in &rows {
                dev.charge(EventClass::Read, CHUNK_BITS as u64, 1);
            }
            dev.set_phase(Phase::Search);
            Ok(unpack_counters(&rows, digits, 1)?[0] as u32)
        })?;
        let ledger = self.device.take_ledger();
        Ok((self.labels.iter().cloned().zip(distances).collect(), ledger))
    }
}
