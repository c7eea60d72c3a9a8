//! Compute-in-memory periphery of the cim-tile.
//!
//! A transverse read yields, per track, a thermometer code of threshold
//! flags. The logic block turns those flags into AND/OR/XOR over the
//! operand rows; the rotate path shifts a row by one bit on its way into
//! the row buffer.

use crate::cost::CostLedger;
use crate::device::{Address, Dbc, Device, DeviceError, Port, Result, RowWord};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Sense-amplifier outputs for a five-domain transverse read. `t23` set
/// means the reference between two and three ones was exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ThresholdFlags {
    pub t01: bool,
    pub t12: bool,
    pub t23: bool,
    pub t34: bool,
    pub t45: bool,
}

impl ThresholdFlags {
    pub fn as_array(&self) -> [bool; 5] {
        [self.t01, self.t12, self.t23, self.t34, self.t45]
    }

    pub fn from_array(f: [bool; 5]) -> Self {
        Self {
            t01: f[0],
            t12: f[1],
            t23: f[2],
            t34: f[3],
            t45: f[4],
        }
    }

    /// Every set flag implies all lower flags are set.
    pub fn is_monotone(&self) -> bool {
        self.as_array().windows(2).all(|w| w[0] || !w[1])
    }

    pub fn count(&self) -> u8 {
        self.as_array().iter().filter(|&&b| b).count() as u8
    }
}

pub fn flags_from_count(count: u8) -> Result<ThresholdFlags> {
    if count > 5 {
        return Err(DeviceError::OutOfBounds(format!(
            "transverse-read count {count} exceeds 5"
        )));
    }
    let mut f = [false; 5];
    f.iter_mut().take(count as usize).for_each(|b| *b = true);
    Ok(ThresholdFlags::from_array(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogicOut {
    pub and: bool,
    pub or: bool,
    pub xor: bool,
}

/// Logic block outputs for `size` operands. Unused window slots are treated
/// as zero padding, so AND compares the count against `size`.
pub fn cim_logic(flags: ThresholdFlags, size: u8) -> LogicOut {
    let f = flags;
    LogicOut {
        or: f.t01,
        and: match size {
            0 => false,
            1 => f.t01,
            2 => f.t12,
            3 => f.t23,
            4 => f.t34,
            _ => f.t45,
        },
        // high for exactly 1, 3 or 5 ones
        xor: (f.t01 && !f.t12) || (f.t23 && !f.t34) || f.t45,
    }
}

/// Selector of the cim-tile output multiplexer. Two of its eight inputs
/// are unassigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CimOpKind {
    Read,
    RotLeft,
    RotRight,
    And,
    Or,
    Xor,
}

impl CimOpKind {
    pub const ALL: [CimOpKind; 6] = [
        CimOpKind::Read,
        CimOpKind::RotLeft,
        CimOpKind::RotRight,
        CimOpKind::And,
        CimOpKind::Or,
        CimOpKind::Xor,
    ];

    /// Multiplexer input index; 6 and 7 are reserved.
    pub fn mux_index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            CimOpKind::Read => "READ",
            CimOpKind::RotLeft => "ROT_LEFT",
            CimOpKind::RotRight => "ROT_RIGHT",
            CimOpKind::And => "AND",
            CimOpKind::Or => "OR",
            CimOpKind::Xor => "XOR",
        }
    }
}

impl fmt::Display for CimOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CimOpKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CimOpKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown cim operation `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rotation {
    /// Bit `i` moves to `i + 1` (mod row width).
    Left,
    /// Bit `i` moves to `i - 1` (mod row width).
    Right,
}

/// Reads the row under `port` through the rotate path. Costs one read;
/// the rotated word lives only in the row buffer.
pub fn rotate_read(dbc: &Dbc, port: Port, direction: Rotation, ledger: &mut CostLedger) -> Result<RowWord> {
    let row = dbc.read_row(port, ledger)?;
    Ok(match direction {
        Rotation::Left => row.rotate_up(1),
        Rotation::Right => row.rotate_down(1),
    })
}

/// Device-level [`rotate_read`]; only the cim-tile has the rotate path.
pub fn rotate_read_at(
    device: &mut Device,
    addr: crate::device::DbcAddr,
    port: Port,
    direction: Rotation,
) -> Result<RowWord> {
    device.require_cim(addr)?;
    device.with_dbc(addr, |d, l| rotate_read(d, port, direction, l))
}

pub fn transverse_write(dbc: &mut Dbc, track: usize, bit: bool, ledger: &mut CostLedger) -> Result<bool> {
    dbc.transverse_write(track, bit, ledger)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CimRequest {
    pub src: Address,
    pub size: u8,
    pub op: CimOpKind,
}

/// Executes one cim pseudo-instruction.
///
/// READ and the rotations act on the row at `src`, aligned to the low port.
/// AND/OR/XOR align the window `src..src+trd` to the ports, transverse-read
/// it once and apply the logic block with `size` operands; window rows past
/// `size` must hold zeros.
pub fn cimop(device: &mut Device, req: CimRequest) -> Result<RowWord> {
    let trd = device.geometry().trd;
    if req.size == 0 || req.size as usize > trd {
        return Err(DeviceError::OutOfBounds(format!(
            "cimop size {} outside 1..={trd}",
            req.size
        )));
    }
    let addr = req.src.dbc_addr();
    device.require_cim(addr)?;
    device.with_dbc(addr, |d, l| match req.op {
        CimOpKind::Read | CimOpKind::RotLeft | CimOpKind::RotRight => {
            d.shift_to(req.src.location, Port::Low, l)?;
            match req.op {
                CimOpKind::Read => d.read_row(Port::Low, l),
                CimOpKind::RotLeft => rotate_read(d, Port::Low, Rotation::Left, l),
                _ => rotate_read(d, Port::Low, Rotation::Right, l),
            }
        }
        CimOpKind::And | CimOpKind::Or | CimOpKind::Xor => {
            d.align_window(req.src.location, l)?;
            let counts = d.tr_read(l)?;
            // every track sees one of trd + 1 counts, so evaluate the
            // sense amplifiers and logic block once per count
            let lut = (0..=trd as u8)
                .map(|c| {
                    let o = cim_logic(flags_from_count(c)?, req.size);
                    Ok(match req.op {
                        CimOpKind::And => o.and,
                        CimOpKind::Or => o.or,
                        _ => o.xor,
                    })
                })
                .collect::<Result<Vec<bool>>>()?;
            let mut out = RowWord::zeros(d.tracks());
            for (t, &c) in counts.iter().enumerate() {
                if lut[c as usize] {
                    out.set(t, true);
                }
            }
            Ok(out)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Phase;
    use crate::device::{DbcAddr, DeviceGeometry};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn device() -> (Device, DbcAddr) {
        let d = Device::new(DeviceGeometry::default()).unwrap();
        let cim = d.geometry().cim_tile();
        (d, DbcAddr::new(0, 0, cim, 3))
    }

    fn random_row(rng: &mut ChaCha8Rng) -> RowWord {
        RowWord::from_words((0..8).map(|_| rng.gen()).collect(), 512)
    }

    #[test]
    fn flags_examples() {
        assert_eq!(flags_from_count(0).unwrap().as_array(), [false; 5]);
        assert_eq!(
            flags_from_count(3).unwrap().as_array(),
            [true, true, true, false, false]
        );
        assert_eq!(flags_from_count(5).unwrap().as_array(), [true; 5]);
        assert!(flags_from_count(6).is_err());
        for c in 0..=5 {
            let f = flags_from_count(c).unwrap();
            assert!(f.is_monotone());
            assert_eq!(f.count(), c);
        }
    }

    #[test]
    fn logic_examples() {
        let o = cim_logic(flags_from_count(3).unwrap(), 5);
        assert!(o.xor && o.or && !o.and);
        let o = cim_logic(flags_from_count(0).unwrap(), 3);
        assert!(!o.or && !o.and && !o.xor);
        let o = cim_logic(flags_from_count(4).unwrap(), 4);
        assert!(o.and && !o.xor);
    }

    #[test]
    fn logic_truth_table_exhaustive() {
        for size in 1u8..=5 {
            for column in 0u32..(1 << size) {
                let bits: Vec<bool> = (0..size).map(|i| (column >> i) & 1 == 1).collect();
                let count = bits.iter().filter(|&&b| b).count() as u8;
                let o = cim_logic(flags_from_count(count).unwrap(), size);
                assert_eq!(o.and, bits.iter().all(|&b| b));
                assert_eq!(o.or, bits.iter().any(|&b| b));
                assert_eq!(o.xor, bits.iter().fold(false, |a, &b| a ^ b));
            }
        }
    }

    #[test]
    fn parse_ops() {
        for k in CimOpKind::ALL {
            assert_eq!(k.name().parse::<CimOpKind>().unwrap(), k);
        }
        assert!("NAND".parse::<CimOpKind>().is_err());
        assert!(CimOpKind::ALL.iter().all(|k| k.mux_index() < 6));
    }

    #[test]
    fn xor_of_zero_and_ones() {
        let (mut dev, a) = device();
        dev.write_at(a.at(1), &RowWord::ones(512)).unwrap();
        let r = cimop(
            &mut dev,
            CimRequest {
                src: a.at(0),
                size: 2,
                op: CimOpKind::Xor,
            },
        )
        .unwrap();
        assert_eq!(r, RowWord::ones(512));
    }

    #[test]
    fn and_with_zero_row_absorbs() {
        let (mut dev, a) = device();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        dev.write_at(a.at(4), &random_row(&mut rng)).unwrap();
        dev.write_at(a.at(6), &random_row(&mut rng)).unwrap();
        let r = cimop(
            &mut dev,
            CimRequest {
                src: a.at(4),
                size: 3,
                op: CimOpKind::And,
            },
        )
        .unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn cimop_cost_is_shifts_plus_one() {
        let (mut dev, a) = device();
        let before = dev.ledger().get(Phase::Io).cycles;
        cimop(
            &mut dev,
            CimRequest {
                src: a.at(7),
                size: 4,
                op: CimOpKind::Or,
            },
        )
        .unwrap();
        assert_eq!(dev.ledger().get(Phase::Io).cycles - before, 7 + 1);
        assert!(cimop(
            &mut dev,
            CimRequest {
                src: a.at(0),
                size: 6,
                op: CimOpKind::Or
            }
        )
        .is_err());
        assert!(cimop(
            &mut dev,
            CimRequest {
                src: a.at(0),
                size: 0,
                op: CimOpKind::Or
            }
        )
        .is_err());
        assert!(cimop(
            &mut dev,
            CimRequest {
                src: a.at(28),
                size: 2,
                op: CimOpKind::Xor
            }
        )
        .is_err());
        let other_tile = DbcAddr::new(0, 0, 0, 3);
        assert!(matches!(
            cimop(
                &mut dev,
                CimRequest {
                    src: other_tile.at(0),
                    size: 2,
                    op: CimOpKind::Xor
                }
            ),
            Err(DeviceError::NotCimTile(0))
        ));
    }

    #[test]
    fn cimop_xor_matches_bitwise_reference() {
        let (mut dev, a) = device();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let k = 1 + trial % 5;
            let src = rng.gen_range(0..=27usize);
            let rows: Vec<RowWord> = (0..k).map(|_| random_row(&mut rng)).collect();
            for i in 0..5 {
                let w = rows.get(i).cloned().unwrap_or_else(|| RowWord::zeros(512));
                dev.write_at(a.at(src + i), &w).unwrap();
            }
            let mut expect = RowWord::zeros(512);
            rows.iter().for_each(|r| expect.xor_assign(r));
            let got = cimop(
                &mut dev,
                CimRequest {
                    src: a.at(src),
                    size: k as u8,
                    op: CimOpKind::Xor,
                },
            )
            .unwrap();
            assert_eq!(got, expect, "trial {trial}");
        }
    }

    #[test]
    fn rotation_examples() {
        let (mut dev, a) = device();
        dev.write_at(a.at(0), &RowWord::ones(512)).unwrap();
        assert_eq!(
            rotate_read_at(&mut dev, a, Port::Low, Rotation::Left).unwrap(),
            RowWord::ones(512)
        );

        let mut single = RowWord::zeros(512);
        single.set(511, true);
        dev.write_row(a, Port::Low, &single).unwrap();
        let r = rotate_read_at(&mut dev, a, Port::Low, Rotation::Left).unwrap();
        assert!(r.get(0) && r.count_ones() == 1);

        let mut single = RowWord::zeros(512);
        single.set(0, true);
        dev.write_row(a, Port::Low, &single).unwrap();
        let r = rotate_read_at(&mut dev, a, Port::Low, Rotation::Right).unwrap();
        assert!(r.get(511) && r.count_ones() == 1);
        // state untouched by the rotate path
        assert_eq!(dev.read_row(a, Port::Low).unwrap(), single);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_row(&mut rng);
        dev.write_row(a, Port::Low, &w).unwrap();
        let l = rotate_read_at(&mut dev, a, Port::Low, Rotation::Left).unwrap();
        dev.write_row(a, Port::Low, &l).unwrap();
        let back = rotate_read_at(&mut dev, a, Port::Low, Rotation::Right).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn rotation_has_period_512() {
        let (mut dev, a) = device();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random_row(&mut rng);
        dev.write_row(a, Port::Low, &w).unwrap();
        for _ in 0..512 {
            let r = rotate_read_at(&mut dev, a, Port::Low, Rotation::Left).unwrap();
            dev.write_row(a, Port::Low, &r).unwrap();
        }
        assert_eq!(dev.read_row(a, Port::Low).unwrap(), w);
    }

    #[test]
    fn transverse_write_examples() {
        let mut d = Dbc::with_shape(1, 5, 0, 4);
        let mut l = CostLedger::new();
        assert!(transverse_write(&mut d, 0, true, &mut l).is_err());
        d.set_independent(true).unwrap();
        assert!(!transverse_write(&mut d, 0, true, &mut l).unwrap());
        assert_eq!(d.window_bits(0).unwrap(), vec![true, false, false, false, false]);
        let mut full = Dbc::with_shape(1, 5, 0, 4);
        full.set_independent(true).unwrap();
        for _ in 0..5 {
            transverse_write(&mut full, 0, true, &mut l).unwrap();
        }
        assert_eq!(full.window_bits(0).unwrap(), vec![true; 5]);
        assert!(transverse_write(&mut full, 0, false, &mut l).unwrap());
        assert_eq!(full.window_bits(0).unwrap(), vec![false, true, true, true, true]);
    }

    #[test]
    fn transverse_write_keeps_last_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut d = Dbc::with_shape(1, 5, 0, 4);
            d.set_independent(true).unwrap();
            let mut l = CostLedger::new();
            let n = rng.gen_range(5..40);
            let seq: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            for &b in &seq {
                transverse_write(&mut d, 0, b, &mut l).unwrap();
            }
            // most recent write sits under the low port
            let expect: Vec<bool> = seq.iter().rev().take(5).copied().collect();
            assert_eq!(d.window_bits(0).unwrap(), expect);
        }
    }
}
