//! CSV event, lifecycle and fill files.
//!
//! Event files open with a comment line that makes them self-describing:
//!
//! ```text
//! # touchdrift-events v1 tick_size=0.015625 start_mid=110.5390625
//! seq,time_s,type,best_bid,best_ask,trade_price,trade_qty,aggressor
//! 0,0,quote,110.53125,110.546875,,,
//! ```
//!
//! `start_mid` is the mid before the first row; it fixes the first row's move.
//! Floats are written in shortest round-trip form, so a written stream reads
//! back bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use touchdrift_core::engine::{LifecycleEvent, LifecycleKind};
use touchdrift_core::{
    Aggressor, FillRecord, MarketEvent, MoveDirection, OrderId, Price, Side, TickGrid, TradeMark,
};

use crate::error::{CliError, Result};

pub const EVENT_FORMAT_TAG: &str = "touchdrift-events v1";
pub const EVENT_COLUMNS: [&str; 8] = [
    "seq",
    "time_s",
    "type",
    "best_bid",
    "best_ask",
    "trade_price",
    "trade_qty",
    "aggressor",
];
pub const LIFECYCLE_COLUMNS: [&str; 6] = ["kind", "order_id", "side", "seq", "time_s", "price"];
pub const FILL_COLUMNS: [&str; 7] = [
    "order_id",
    "side",
    "fill_seq",
    "time_s",
    "fill_price",
    "mid_at_fill",
    "adverse",
];

#[derive(Clone, Debug, PartialEq)]
pub struct EventFile {
    pub grid: TickGrid,
    pub events: Vec<MarketEvent>,
    /// Seqs of rows whose spread is wider than one tick.
    pub wide_spread_seqs: Vec<u64>,
}

fn side_code(side: Side) -> &'static str {
    match side {
        Side::Buy => "buy",
        Side::Sell => "sell",
    }
}

fn kind_code(kind: LifecycleKind) -> &'static str {
    match kind {
        LifecycleKind::Added => "added",
        LifecycleKind::Canceled => "canceled",
        LifecycleKind::Filled => "filled",
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(CliError::io(path))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(CliError::io(path))
}

/// Writes `events` with the self-describing header.
pub fn write_events<W: Write>(mut w: W, events: &[MarketEvent], grid: TickGrid) -> Result<()> {
    let io = |e| CliError::Io {
        path: "<events>".into(),
        source: e,
    };
    write!(w, "# {EVENT_FORMAT_TAG} tick_size={}", grid.tick_size()).map_err(io)?;
    if let Some(first) = events.first() {
        if let Some(mid) = first.mid_lenient() {
            let before = mid - 2 * first.direction.ticks();
            write!(w, " start_mid={}", grid.to_external(before)).map_err(io)?;
        }
    }
    writeln!(w).map_err(io)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVENT_COLUMNS)?;
    for e in events {
        let px = |p: Price| grid.to_external(p).to_string();
        let (kind, price, qty, aggressor) = match e.trade {
            Some(t) => (
                "trade",
                px(t.price),
                t.qty.to_string(),
                match t.aggressor {
                    Aggressor::Buy => "B",
                    Aggressor::Sell => "S",
                }
                .to_string(),
            ),
            None => ("quote", String::new(), String::new(), String::new()),
        };
        out.write_record([
            e.seq.to_string(),
            e.time_s.to_string(),
            kind.to_string(),
            px(e.best_bid),
            px(e.best_ask),
            price,
            qty,
            aggressor,
        ])?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

pub fn write_events_file(path: &Path, events: &[MarketEvent], grid: TickGrid) -> Result<()> {
    write_events(create(path)?, events, grid)
}

struct Header {
    tick_size: Option<f64>,
    start_mid: Option<f64>,
}

fn parse_header(line: &str) -> Result<Header> {
    let body = line.trim_start_matches('#').trim();
    let mut header = Header {
        tick_size: None,
        start_mid: None,
    };
    if !body.starts_with(EVENT_FORMAT_TAG) {
        return Ok(header);
    }
    for token in body[EVENT_FORMAT_TAG.len()..].split_whitespace() {
        let bad = || CliError::Parse {
            line: 1,
            column: "header".into(),
            message: format!("malformed header field `{token}`"),
        };
        let (key, value) = token.split_once('=').ok_or_else(bad)?;
        let value: f64 = value.parse().map_err(|_| bad())?;
        match key {
            "tick_size" => header.tick_size = Some(value),
            "start_mid" => header.start_mid = Some(value),
            _ => return Err(bad()),
        }
    }
    Ok(header)
}

/// Reads CSV rows after an optional leading comment line; yields
/// `(line_number, record)` pairs with 1-based file line numbers.
struct RowReader<R: Read> {
    inner: csv::Reader<R>,
    line_offset: u64,
}

impl<R: Read> RowReader<R> {
    fn new(inner: R, line_offset: u64, columns: &[&str]) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(inner);
        let headers = inner.headers()?.clone();
        if headers.iter().ne(columns.iter().copied()) {
            return Err(CliError::Parse {
                line: line_offset + 1,
                column: "header".into(),
                message: format!("expected columns {}", columns.join(",")),
            });
        }
        Ok(Self { inner, line_offset })
    }

    fn for_each(&mut self, mut f: impl FnMut(u64, &Fields<'_>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        loop {
            let more = self.inner.read_record(&mut record).map_err(|e| {
                let line = e.position().map_or(0, |p| p.line()) + self.line_offset;
                CliError::Parse {
                    line,
                    column: "row".into(),
                    message: e.to_string(),
                }
            })?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line()) + self.line_offset;
            let headers = self.inner.headers()?.clone();
            f(
                line,
                &Fields {
                    line,
                    record: &record,
                    headers: &headers,
                },
            )?;
        }
    }
}

struct Fields<'a> {
    line: u64,
    record: &'a csv::StringRecord,
    headers: &'a csv::StringRecord,
}

impl Fields<'_> {
    fn raw(&self, column: usize) -> &str {
        self.record.get(column).unwrap_or("").trim()
    }

    fn error(&self, column: usize, message: impl Into<String>) -> CliError {
        CliError::Parse {
            line: self.line,
            column: self.headers.get(column).unwrap_or("?").to_string(),
            message: message.into(),
        }
    }

    fn parse<T: std::str::FromStr>(&self, column: usize) -> Result<T> {
        let raw = self.raw(column);
        raw.parse()
            .map_err(|_| self.error(column, format!("cannot parse `{raw}`")))
    }

    fn price(&self, column: usize, grid: TickGrid) -> Result<Price> {
        let value: f64 = self.parse(column)?;
        grid.to_internal(value).map_err(|_| CliError::OffGridPrice {
            line: self.line,
            price: value,
            tick_size: grid.tick_size(),
        })
    }

    fn side(&self, column: usize) -> Result<Side> {
        match self.raw(column) {
            "buy" => Ok(Side::Buy),
            "sell" => Ok(Side::Sell),
            other => Err(self.error(column, format!("unknown side `{other}`"))),
        }
    }
}

/// Reads an event file. An explicit `grid` must agree with the file header
/// when both are present; with neither, the ten-year note grid is used.
pub fn read_events<R: Read>(reader: R, grid: Option<TickGrid>) -> Result<EventFile> {
    let mut reader = BufReader::new(reader);
    let mut first_line = String::new();
    let mut offset = 0;
    let mut header = Header {
        tick_size: None,
        start_mid: None,
    };
    let peek = reader
        .fill_buf()
        .map_err(CliError::io(Path::new("<events>")))?;
    if peek.first() == Some(&b'#') {
        reader
            .read_line(&mut first_line)
            .map_err(CliError::io(Path::new("<events>")))?;
        header = parse_header(&first_line)?;
        offset = 1;
    }
    let grid = match (grid, header.tick_size) {
        (Some(g), Some(t)) if g.tick_size() != t => {
            return Err(CliError::Parse {
                line: 1,
                column: "header".into(),
                message: format!("file tick_size {t} differs from {}", g.tick_size()),
            })
        }
        (Some(g), _) => g,
        (None, Some(t)) => TickGrid::new(t)?,
        (None, None) => TickGrid::TEN_YEAR_NOTE,
    };
    let mut prev_mid = match header.start_mid {
        Some(p) => Some(grid.to_internal(p).map_err(|_| CliError::OffGridPrice {
            line: 1,
            price: p,
            tick_size: grid.tick_size(),
        })?),
        None => None,
    };
    let mut events: Vec<MarketEvent> = Vec::new();
    let mut wide_spread_seqs = Vec::new();
    let mut rows = RowReader::new(reader, offset, &EVENT_COLUMNS)?;
    rows.for_each(|_, f| {
        let seq: u64 = f.parse(0)?;
        let time_s: f64 = f.parse(1)?;
        if !(time_s.is_finite() && time_s >= 0.0) {
            return Err(f.error(1, "time must be finite and non-negative"));
        }
        let best_bid = f.price(3, grid)?;
        let best_ask = f.price(4, grid)?;
        if best_ask <= best_bid {
            return Err(f.error(4, "best_ask must exceed best_bid"));
        }
        if (best_bid.0 + best_ask.0) % 2 != 0 {
            return Err(f.error(4, "mid is off the half-tick lattice"));
        }
        if let Some(prev) = events.last() {
            if seq <= prev.seq {
                return Err(f.error(0, "seq must increase"));
            }
            if time_s < prev.time_s {
                return Err(CliError::NonMonotoneTime {
                    line: f.line,
                    time_s,
                });
            }
        }
        let trade = match f.raw(2) {
            "quote" => {
                if (5..8).any(|c| !f.raw(c).is_empty()) {
                    return Err(f.error(5, "quote rows leave the trade columns empty"));
                }
                None
            }
            "trade" => Some(TradeMark {
                price: f.price(5, grid)?,
                qty: f.parse(6)?,
                aggressor: match f.raw(7) {
                    "B" => Aggressor::Buy,
                    "S" => Aggressor::Sell,
                    other => return Err(f.error(7, format!("unknown aggressor `{other}`"))),
                },
            }),
            other => return Err(f.error(2, format!("unknown type `{other}`"))),
        };
        let mid = Price((best_bid.0 + best_ask.0) / 2);
        let direction = prev_mid.map_or(MoveDirection::Middle, |p| {
            MoveDirection::from_change(mid.0 - p.0)
        });
        prev_mid = Some(mid);
        if best_ask.0 - best_bid.0 != 2 {
            wide_spread_seqs.push(seq);
        }
        events.push(MarketEvent {
            seq,
            time_s,
            direction,
            best_bid,
            best_ask,
            trade,
        });
        Ok(())
    })?;
    Ok(EventFile {
        grid,
        events,
        wide_spread_seqs,
    })
}

pub fn read_events_file(path: &Path, grid: Option<TickGrid>) -> Result<EventFile> {
    read_events(open(path)?, grid)
}

pub fn write_lifecycle<W: Write>(w: W, lifecycle: &[LifecycleEvent], grid: TickGrid) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(LIFECYCLE_COLUMNS)?;
    for l in lifecycle {
        out.write_record([
            kind_code(l.kind).to_string(),
            l.order_id.0.to_string(),
            side_code(l.side).to_string(),
            l.seq.to_string(),
            l.time_s.to_string(),
            grid.to_external(l.price).to_string(),
        ])?;
    }
    out.flush()
        .map_err(CliError::io(Path::new("<lifecycle>")))?;
    Ok(())
}

pub fn read_lifecycle<R: Read>(r: R, grid: TickGrid) -> Result<Vec<LifecycleEvent>> {
    let mut out = Vec::new();
    RowReader::new(r, 0, &LIFECYCLE_COLUMNS)?.for_each(|_, f| {
        let kind = match f.raw(0) {
            "added" => LifecycleKind::Added,
            "canceled" => LifecycleKind::Canceled,
            "filled" => LifecycleKind::Filled,
            other => return Err(f.error(0, format!("unknown kind `{other}`"))),
        };
        out.push(LifecycleEvent {
            kind,
            order_id: OrderId(f.parse(1)?),
            side: f.side(2)?,
            seq: f.parse(3)?,
            time_s: f.parse(4)?,
            price: f.price(5, grid)?,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_fills<W: Write>(w: W, fills: &[FillRecord], grid: TickGrid) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(FILL_COLUMNS)?;
    for f in fills {
        out.write_record([
            f.order_id.0.to_string(),
            side_code(f.side).to_string(),
            f.fill_seq.to_string(),
            f.time_s.to_string(),
            grid.to_external(f.fill_price).to_string(),
            grid.to_external(f.mid_at_fill).to_string(),
            f.adverse.to_string(),
        ])?;
    }
    out.flush().map_err(CliError::io(Path::new("<fills>")))?;
    Ok(())
}

pub fn read_fills<R: Read>(r: R, grid: TickGrid) -> Result<Vec<FillRecord>> {
    let mut out = Vec::new();
    RowReader::new(r, 0, &FILL_COLUMNS)?.for_each(|_, f| {
        out.push(FillRecord {
            order_id: OrderId(f.parse(0)?),
            side: f.side(1)?,
            fill_seq: f.parse(2)?,
            time_s: f.parse(3)?,
            fill_price: f.price(4, grid)?,
            mid_at_fill: f.price(5, grid)?,
            adverse: f.parse(6)?,
        });
        Ok(())
    })?;
    Ok(out)
}
