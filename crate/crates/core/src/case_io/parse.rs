use std::collections::{HashMap, HashSet};

use super::{validate, Branch, Bus, BusId, BusRole, CaseError, Generator, Load, Network};

/// One numeric table from the case text, with the source line of each row.
#[derive(Debug, Default)]
struct Table {
    rows: Vec<Vec<f64>>,
    lines: Vec<usize>,
}

#[derive(Debug, Default)]
struct RawCase {
    base_mva: Option<f64>,
    tables: HashMap<String, Table>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> CaseError {
    CaseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Splits the text into `mpc.baseMVA` and the numeric `mpc.<name> = [...]` tables.
fn lex(text: &str) -> Result<RawCase, CaseError> {
    let mut raw = RawCase::default();
    // (name, table, row under construction)
    let mut open: Option<(String, Table, Vec<f64>)> = None;

    for (ln0, full) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let body = strip_comment(full);
        let mut rest: &str = body;
        let mut offset = 0usize;

        if open.is_none() {
            let trimmed = body.trim_start();
            offset = body.len() - trimmed.len();
            let trimmed = trimmed.trim_end();
            if trimmed.is_empty() || trimmed.starts_with("function") {
                continue;
            }
            let Some(after) = trimmed.strip_prefix("mpc.") else {
                return Err(syntax(ln, offset + 1, "expected `mpc.<name> = ...`"));
            };
            let Some(eq) = after.find('=') else {
                return Err(syntax(ln, offset + 1, "missing `=` in assignment"));
            };
            let name = after[..eq].trim().to_string();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(syntax(ln, offset + 5, format!("bad section name `{name}`")));
            }
            let value = &after[eq + 1..];
            let value_col = offset + 4 + eq + 1 + (value.len() - value.trim_start().len());
            let value = value.trim();
            if let Some(inner) = value.strip_prefix('[') {
                if raw.tables.contains_key(&name) {
                    return Err(syntax(
                        ln,
                        offset + 1,
                        format!("section mpc.{name} repeated"),
                    ));
                }
                open = Some((name, Table::default(), Vec::new()));
                offset = value_col + 1;
                rest = inner;
            } else {
                let scalar = value.trim_end_matches(';').trim();
                if name == "baseMVA" {
                    let v: f64 = scalar
                        .parse()
                        .map_err(|_| syntax(ln, value_col + 1, format!("bad number `{scalar}`")))?;
                    raw.base_mva = Some(v);
                }
                // other scalar assignments (version strings) are ignored
                continue;
            }
        }

        let (name, table, row) = open.as_mut().expect("inside a table");
        let mut chars = rest.char_indices().peekable();
        let mut closed = false;
        while let Some((i, c)) = chars.next() {
            let col = offset + i + 1;
            match c {
                ' ' | '\t' | ',' | '\r' => {}
                ';' => {
                    if !row.is_empty() {
                        table.rows.push(std::mem::take(row));
                        table.lines.push(ln);
                    }
                }
                ']' => {
                    closed = true;
                    let tail = rest[i + 1..].trim();
                    if !(tail.is_empty() || tail == ";") {
                        return Err(syntax(
                            ln,
                            col + 1,
                            format!("unexpected `{tail}` after `]`"),
                        ));
                    }
                    break;
                }
                _ => {
                    let start = i;
                    let mut end = i + c.len_utf8();
                    while let Some(&(j, d)) = chars.peek() {
                        if d.is_whitespace() || d == ',' || d == ';' || d == ']' {
                            break;
                        }
                        end = j + d.len_utf8();
                        chars.next();
                    }
                    let tok = &rest[start..end];
                    let v: f64 = tok.parse().map_err(|_| {
                        syntax(ln, col, format!("bad number `{tok}` in mpc.{name}"))
                    })?;
                    row.push(v);
                }
            }
        }
        // newline also terminates a row
        if !row.is_empty() {
            table.rows.push(std::mem::take(row));
            table.lines.push(ln);
        }
        if closed {
            let (name, table, _) = open.take().expect("open table");
            raw.tables.insert(name, table);
        }
    }
    if let Some((name, table, _)) = open {
        let line = table.lines.last().copied().unwrap_or(0);
        return Err(syntax(line, 1, format!("unterminated section mpc.{name}")));
    }
    Ok(raw)
}

fn need_cols(name: &str, table: &Table, min: usize) -> Result<(), CaseError> {
    for (row, &ln) in table.rows.iter().zip(&table.lines) {
        if row.len() < min {
            return Err(syntax(
                ln,
                1,
                format!(
                    "mpc.{name} row has {} columns, need at least {min}",
                    row.len()
                ),
            ));
        }
    }
    Ok(())
}

fn as_id(v: f64, line: usize, what: &str) -> Result<BusId, CaseError> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(syntax(line, 1, format!("{what} `{v}` is not a valid id")));
    }
    Ok(v as BusId)
}

/// Parse the restricted MATPOWER case text into a validated [`Network`].
///
/// MW/MVAr quantities are divided by `baseMVA`; linear costs given per MW
/// are multiplied by it so that `cost_coeff` is per pu.
pub fn parse_case(text: &str) -> Result<Network, CaseError> {
    let mut raw = lex(text)?;
    let base = raw.base_mva.ok_or(CaseError::MissingSection("baseMVA"))?;
    let mut take = |name: &'static str| {
        raw.tables
            .remove(name)
            .ok_or(CaseError::MissingSection(name))
    };
    let bus_t = take("bus")?;
    let gen_t = take("gen")?;
    let branch_t = take("branch")?;
    let cost_t = take("gencost")?;
    let shed_t = raw.tables.remove("shedcost");

    need_cols("bus", &bus_t, 13)?;
    need_cols("gen", &gen_t, 10)?;
    need_cols("branch", &branch_t, 13)?;
    need_cols("gencost", &cost_t, 4)?;

    let mut buses = Vec::with_capacity(bus_t.rows.len());
    let mut loads = Vec::new();
    let mut seen = HashSet::new();
    for (row, &ln) in bus_t.rows.iter().zip(&bus_t.lines) {
        let id = as_id(row[0], ln, "bus id")?;
        if !seen.insert(id) {
            return Err(CaseError::DuplicateId { kind: "bus", id });
        }
        let role = BusRole::from_code(row[1] as i64)
            .filter(|_| row[1].fract() == 0.0)
            .ok_or_else(|| CaseError::Unsupported {
                line: ln,
                message: format!("bus {id} has unsupported type {}", row[1]),
            })?;
        let (pd, qd) = (row[2], row[3]);
        if pd != 0.0 || qd != 0.0 {
            loads.push(Load {
                bus: id,
                p_demand: -(pd / base),
                q_demand: -(qd / base),
                shed_cost: f64::NAN,
                served_fraction: 1.0,
            });
        }
        buses.push(Bus {
            id,
            role,
            v_setpoint: row[7],
            v_min: row[12],
            v_max: row[11],
            gs: row[4] / base,
            bs: row[5] / base,
        });
    }
    let known = |bus: BusId, element: String| {
        if seen.contains(&bus) {
            Ok(())
        } else {
            Err(CaseError::UnknownBus { element, bus })
        }
    };

    if cost_t.rows.len() != gen_t.rows.len() {
        return Err(CaseError::Unsupported {
            line: cost_t.lines.first().copied().unwrap_or(0),
            message: format!(
                "mpc.gencost has {} rows for {} generators",
                cost_t.rows.len(),
                gen_t.rows.len()
            ),
        });
    }
    let mut generators = Vec::with_capacity(gen_t.rows.len());
    let mut setpoints: HashMap<BusId, f64> = HashMap::new();
    for (k, ((row, &ln), (cost, &cln))) in gen_t
        .rows
        .iter()
        .zip(&gen_t.lines)
        .zip(cost_t.rows.iter().zip(&cost_t.lines))
        .enumerate()
    {
        let bus = as_id(row[0], ln, "generator bus")?;
        known(bus, format!("generator {}", k + 1))?;
        setpoints.entry(bus).or_insert(row[5]);
        if cost[0] != 2.0 {
            return Err(CaseError::Unsupported {
                line: cln,
                message: "only polynomial (model 2) generator costs are supported".into(),
            });
        }
        let n = cost[3];
        if !(n == 1.0 || n == 2.0) {
            return Err(CaseError::Unsupported {
                line: cln,
                message: format!(
                    "generator cost with {n} coefficients; only linear costs are supported"
                ),
            });
        }
        let n = n as usize;
        if cost.len() < 4 + n {
            return Err(syntax(
                cln,
                1,
                "gencost row shorter than its coefficient count",
            ));
        }
        let c1 = if n == 2 { cost[4] } else { 0.0 };
        generators.push(Generator {
            bus,
            p_min: row[9] / base,
            p_max: row[8] / base,
            q_min: row[4] / base,
            q_max: row[3] / base,
            cost_coeff: c1 * base,
            in_service: row[7] > 0.0,
            p_dispatch: row[1] / base,
        });
    }
    for b in &mut buses {
        if let Some(&vg) = setpoints.get(&b.id) {
            b.v_setpoint = vg;
        }
    }

    let mut branches = Vec::with_capacity(branch_t.rows.len());
    for (k, (row, &ln)) in branch_t.rows.iter().zip(&branch_t.lines).enumerate() {
        let id = (k + 1) as BusId;
        let from_bus = as_id(row[0], ln, "branch from bus")?;
        let to_bus = as_id(row[1], ln, "branch to bus")?;
        known(from_bus, format!("branch {id}"))?;
        known(to_bus, format!("branch {id}"))?;
        if row[9] != 0.0 {
            return Err(CaseError::Unsupported {
                line: ln,
                message: format!("branch {id} has a phase shift; phase shifters are not modelled"),
            });
        }
        let ratio = row[8];
        branches.push(Branch {
            id,
            from_bus,
            to_bus,
            r: row[2],
            x: row[3],
            b: row[4],
            tap_ratio: if ratio == 0.0 { 1.0 } else { ratio },
            rating: row[5] / base,
            in_service: row[10] > 0.0,
            is_transformer: ratio != 0.0,
        });
    }

    let mut shed: HashMap<BusId, (f64, Option<f64>)> = HashMap::new();
    if let Some(t) = &shed_t {
        need_cols("shedcost", t, 2)?;
        for (row, &ln) in t.rows.iter().zip(&t.lines) {
            let bus = as_id(row[0], ln, "shedcost bus")?;
            known(bus, "shedcost row".to_string())?;
            shed.insert(bus, (row[1] * base, row.get(2).copied()));
        }
    }
    let default_shed = 100.0 * generators.iter().map(|g| g.cost_coeff).fold(0.0, f64::max);
    for l in &mut loads {
        match shed.get(&l.bus) {
            Some(&(d, served)) => {
                l.shed_cost = d;
                if let Some(f) = served {
                    l.served_fraction = f;
                }
            }
            None => l.shed_cost = default_shed,
        }
    }

    let net = Network {
        base_mva: base,
        buses,
        branches,
        generators,
        loads,
    };
    let violations = validate(&net);
    if violations.is_empty() {
        Ok(net)
    } else {
        Err(CaseError::Invalid(violations))
    }
}
