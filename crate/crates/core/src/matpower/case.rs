//! MATPOWER case file parsing: baseMVA plus the bus/gen/branch matrices in
//! bracketed numeric rows, `%` comments, extra columns ignored.

use std::collections::HashMap;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusType {
    Pq,
    Pv,
    Slack,
}

#[derive(Debug, Clone)]
pub struct Bus {
    pub id: usize,
    pub bus_type: BusType,
    /// Load (MW, MVAr).
    pub pd: f64,
    pub qd: f64,
    /// Shunt (MW, MVAr at V = 1 pu).
    pub gs: f64,
    pub bs: f64,
    pub vm: f64,
    pub va_deg: f64,
    pub base_kv: f64,
}

#[derive(Debug, Clone)]
pub struct Gen {
    pub bus: usize,
    pub pg: f64,
    pub qg: f64,
    pub qmax: f64,
    pub qmin: f64,
    pub vg: f64,
    pub status: bool,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b: f64,
    /// Off-nominal tap ratio; 0 in the file means 1.
    pub tap: f64,
    pub shift_deg: f64,
    pub status: bool,
}

#[derive(Debug, Clone)]
pub struct CaseData {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub gens: Vec<Gen>,
    pub branches: Vec<Branch>,
}

impl CaseData {
    /// Bus id -> position in the bus table (ids may be non-consecutive).
    pub fn bus_index(&self) -> HashMap<usize, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id, i))
            .collect()
    }

    pub fn slack(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.bus_type == BusType::Slack)
    }

    /// In-service generators at a bus.
    pub fn gens_at(&self, bus_id: usize) -> impl Iterator<Item = &Gen> {
        self.gens
            .iter()
            .filter(move |g| g.bus == bus_id && g.status)
    }

    fn validate(&self) -> Result<(), Error> {
        let slacks = self
            .buses
            .iter()
            .filter(|b| b.bus_type == BusType::Slack)
            .count();
        if slacks != 1 {
            return Err(Error::Case(format!(
                "expected exactly one slack bus, found {slacks}"
            )));
        }
        let index = self.bus_index();
        for br in &self.branches {
            if !index.contains_key(&br.from) || !index.contains_key(&br.to) {
                return Err(Error::Case(format!(
                    "branch {}-{} references a missing bus",
                    br.from, br.to
                )));
            }
        }
        for g in &self.gens {
            if !index.contains_key(&g.bus) {
                return Err(Error::Case(format!(
                    "generator at bus {} references a missing bus",
                    g.bus
                )));
            }
        }
        Ok(())
    }
}

/// Strip `%` comments, keeping line structure.
fn strip_comments(text: &str) -> String {
    text.lines()
        .map(|line| match line.find('%') {
            Some(i) => &line[..i],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Extract the bracketed body of `mpc.<table> = [ ... ];`.
fn matrix_body<'a>(text: &'a str, table: &str) -> Result<&'a str, Error> {
    let needle = format!("mpc.{table}");
    let start = text
        .find(&needle)
        .ok_or_else(|| Error::Case(format!("missing table `{table}`")))?;
    let after = &text[start + needle.len()..];
    let open = after
        .find('[')
        .ok_or_else(|| Error::Case(format!("table `{table}` has no `[`")))?;
    let body = &after[open + 1..];
    let close = body
        .find(']')
        .ok_or_else(|| Error::Case(format!("table `{table}` has no closing `]`")))?;
    Ok(&body[..close])
}

/// Parse rows of whitespace-separated numeric fields; rows separated by `;`
/// or newlines. Every row must have at least `min_cols` fields and match the
/// first row's width (ragged rows are an error).
fn parse_rows(body: &str, table: &str, min_cols: usize) -> Result<Vec<Vec<f64>>, Error> {
    let mut rows = Vec::new();
    let mut width = None;
    for raw in body.split(|c| c == ';' || c == '\n') {
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in raw.split_whitespace() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Case(format!("table `{table}`: non-numeric field `{field}`"))
            })?;
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Case(format!(
                    "table `{table}`: ragged row ({} fields, expected {w})",
                    row.len()
                )))
            }
            _ => {}
        }
        if row.len() < min_cols {
            return Err(Error::Case(format!(
                "table `{table}`: row has {} fields, need at least {min_cols}",
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Case(format!("table `{table}` is empty")));
    }
    Ok(rows)
}

/// Parse a MATPOWER-style case file.
pub fn parse_case(text: &str) -> Result<CaseData, Error> {
    let clean = strip_comments(text);
    let name = clean
        .lines()
        .find_map(|l| {
            let l = l.trim();
            l.strip_prefix("function mpc =")
                .or_else(|| l.strip_prefix("function mpc="))
                .map(|s| s.trim().to_string())
        })
        .unwrap_or_default();
    let base_mva = {
        let key = "mpc.baseMVA";
        let start = clean
            .find(key)
            .ok_or_else(|| Error::Case("missing baseMVA".into()))?;
        let rest = &clean[start + key.len()..];
        let eq = rest
            .find('=')
            .ok_or_else(|| Error::Case("malformed baseMVA".into()))?;
        let value = rest[eq + 1..]
            .split(|c: char| c == ';' || c == '\n')
            .next()
            .unwrap_or("")
            .trim();
        value
            .parse::<f64>()
            .map_err(|_| Error::Case(format!("bad baseMVA `{value}`")))?
    };

    let buses = parse_rows(matrix_body(&clean, "bus")?, "bus", 13)?
        .into_iter()
        .map(|r| {
            let bus_type = match r[1] as i64 {
                1 => Ok(BusType::Pq),
                2 => Ok(BusType::Pv),
                3 => Ok(BusType::Slack),
                other => Err(Error::Case(format!(
                    "bus {}: unsupported bus type {other}",
                    r[0]
                ))),
            }?;
            Ok(Bus {
                id: r[0] as usize,
                bus_type,
                pd: r[2],
                qd: r[3],
                gs: r[4],
                bs: r[5],
                vm: r[7],
                va_deg: r[8],
                base_kv: r[9],
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let gens = parse_rows(matrix_body(&clean, "gen")?, "gen", 10)?
        .into_iter()
        .map(|r| Gen {
            bus: r[0] as usize,
            pg: r[1],
            qg: r[2],
            qmax: r[3],
            qmin: r[4],
            vg: r[5],
            status: r[7] != 0.0,
        })
        .collect();

    let branches = parse_rows(matrix_body(&clean, "branch")?, "branch", 11)?
        .into_iter()
        .map(|r| Branch {
            from: r[0] as usize,
            to: r[1] as usize,
            r: r[2],
            x: r[3],
            b: r[4],
            tap: r[8],
            shift_deg: r[9],
            status: r[10] != 0.0,
        })
        .collect();

    let case = CaseData {
        name,
        base_mva,
        buses,
        gens,
        branches,
    };
    case.validate()?;
    Ok(case)
}
