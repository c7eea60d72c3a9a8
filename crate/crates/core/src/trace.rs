//! Textual micro-op traces for poking at the device by hand.
//!
//! One instruction per line; `#` starts a comment, blank lines are skipped,
//! keywords are case-insensitive:
//!
//! ```text
//! WRITE b.s.t.d loc ROW      write a row (ROW: zeros | ones | rand:SEED | hex)
//! READ  b.s.t.d loc          read a row at the nearest port
//! CIMOP b.s.t.d loc size OP  OP: READ | ROT_LEFT | ROT_RIGHT | AND | OR | XOR
//! PHASE name                 charge following ops to encode|bundle|search|io
//! ```
//!
//! Hex rows are little-endian bytes, two digits per byte, bit 0 in the low
//! bit of the first byte; they must cover exactly one row.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitBuf;
use crate::cim::{cimop, CimRequest};
use crate::cost::Phase;
use crate::device::{Address, Device, DeviceError, RowWord};

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Device { line: usize, source: DeviceError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowSpec {
    Zeros,
    Ones,
    Rand(u64),
    Hex(String),
}

impl RowSpec {
    fn resolve(&self, width: usize) -> Option<RowWord> {
        Some(match self {
            RowSpec::Zeros => BitBuf::zeros(width),
            RowSpec::Ones => BitBuf::ones(width),
            RowSpec::Rand(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let bools: Vec<bool> = (0..width).map(|_| rand::Rng::gen(&mut rng)).collect();
                BitBuf::from_bools(&bools)
            }
            RowSpec::Hex(h) => BitBuf::from_hex(h, width)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceOp {
    Write { addr: Address, row: RowSpec },
    Read { addr: Address },
    Cim(CimRequest),
    Phase(Phase),
}

impl fmt::Display for TraceOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = |a: &Address| format!("{} {}", a.dbc_addr(), a.location);
        match self {
            TraceOp::Write { addr, row } => {
                let r = match row {
                    RowSpec::Zeros => "zeros".to_string(),
                    RowSpec::Ones => "ones".to_string(),
                    RowSpec::Rand(s) => format!("rand:{s}"),
                    RowSpec::Hex(h) => h.clone(),
                };
                write!(f, "WRITE {} {r}", at(addr))
            }
            TraceOp::Read { addr } => write!(f, "READ {}", at(addr)),
            TraceOp::Cim(r) => write!(f, "CIMOP {} {} {}", at(&r.src), r.size, r.op),
            TraceOp::Phase(p) => write!(f, "PHASE {}", p.name()),
        }
    }
}

fn parse_address(dbc: &str, loc: &str) -> Result<Address, String> {
    let parts: Vec<usize> = dbc
        .split('.')
        .map(|p| p.parse().map_err(|_| format!("bad address component {p:?}")))
        .collect::<Result<_, _>>()?;
    let [bank, subarray, tile, dbc] = parts[..] else {
        return Err(format!("address {dbc:?} is not bank.subarray.tile.dbc"));
    };
    let location = loc.parse().map_err(|_| format!("bad location {loc:?}"))?;
    Ok(Address {
        bank,
        subarray,
        tile,
        dbc,
        location,
    })
}

fn parse_row(s: &str) -> Result<RowSpec, String> {
    let l = s.to_ascii_lowercase();
    Ok(match l.as_str() {
        "zeros" => RowSpec::Zeros,
        "ones" => RowSpec::Ones,
        _ => match l.strip_prefix("rand:") {
            Some(seed) => RowSpec::Rand(seed.parse().map_err(|_| format!("bad seed {seed:?}"))?),
            None if !l.is_empty() && l.bytes().all(|b| b.is_ascii_hexdigit()) => RowSpec::Hex(l),
            None => return Err(format!("bad row {s:?}")),
        },
    })
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    Phase::ALL
        .into_iter()
        .find(|p| p.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown phase {s:?}"))
}

pub fn parse_line(line: &str) -> Result<Option<TraceOp>, String> {
    let code = line.split('#').next().unwrap_or("");
    let f: Vec<&str> = code.split_whitespace().collect();
    let Some(kw) = f.first() else {
        return Ok(None);
    };
    let want = |n: usize| {
        if f.len() == n {
            Ok(())
        } else {
            Err(format!(
                "{} takes {} operands, got {}",
                kw.to_ascii_uppercase(),
                n - 1,
                f.len() - 1
            ))
        }
    };
    let op = match kw.to_ascii_uppercase().as_str() {
        "WRITE" => {
            want(4)?;
            TraceOp::Write {
                addr: parse_address(f[1], f[2])?,
                row: parse_row(f[3])?,
            }
        }
        "READ" => {
            want(3)?;
            TraceOp::Read {
                addr: parse_address(f[1], f[2])?,
            }
        }
        "CIMOP" => {
            want(5)?;
            TraceOp::Cim(CimRequest {
                src: parse_address(f[1], f[2])?,
                size: f[3].parse().map_err(|_| format!("bad size {:?}", f[3]))?,
                op: f[4].parse()?,
            })
        }
        "PHASE" => {
            want(2)?;
            TraceOp::Phase(parse_phase(f[1])?)
        }
        other => return Err(format!("unknown instruction {other:?}")),
    };
    Ok(Some(op))
}

/// Parses a whole trace; entries carry their 1-based line numbers.
pub fn parse_trace(text: &str) -> Result<Vec<(usize, TraceOp)>, TraceError> {
    let mut ops = Vec::new();
    for (i, line) in text.lines().enumerate() {
        match parse_line(line) {
            Ok(Some(op)) => ops.push((i + 1, op)),
            Ok(None) => {}
            Err(msg) => return Err(TraceError::Parse { line: i + 1, msg }),
        }
    }
    Ok(ops)
}

#[derive(Debug, Clone)]
pub struct TraceOutcome {
    pub line: usize,
    pub op: TraceOp,
    /// Row produced by READ and CIMOP.
    pub row: Option<RowWord>,
    pub cycles: u64,
}

/// Runs the ops on `device`, recording each op's cycle cost.
pub fn run_trace(device: &mut Device, ops: &[(usize, TraceOp)]) -> Result<Vec<TraceOutcome>, TraceError> {
    let width = device.geometry().tracks_per_dbc;
    ops.iter()
        .map(|(line, op)| {
            let line = *line;
            let before = device.ledger().total().cycles;
            let dev = |source| TraceError::Device { line, source };
            let row = match op {
                TraceOp::Write { addr, row } => {
                    let word = row.resolve(width).ok_or_else(|| TraceError::Parse {
                        line,
                        msg: format!("hex row must be {} digits", width / 4),
                    })?;
                    device.write_at(*addr, &word).map_err(dev)?;
                    None
                }
                TraceOp::Read { addr } => Some(device.read_at(*addr).map_err(dev)?),
                TraceOp::Cim(req) => Some(cimop(device, *req).map_err(dev)?),
                TraceOp::Phase(p) => {
                    device.set_phase(*p);
                    None
                }
            };
            Ok(TraceOutcome {
                line,
                op: op.clone(),
                row,
                cycles: device.ledger().total().cycles - before,
            })
        })
        .collect()
}
