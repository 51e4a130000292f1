use std::collections::HashMap;
use std::fmt::Write;

use super::{BusId, Network};

/// Smallest-distance float `w` with `w / base == v`, so the text value
/// re-parses to exactly `v`.
fn undo_div(v: f64, base: f64) -> f64 {
    nudge(v * base, |w| w / base == v)
}

/// Float `w` with `w * base == v`.
fn undo_mul(v: f64, base: f64) -> f64 {
    nudge(v / base, |w| w * base == v)
}

fn nudge(start: f64, ok: impl Fn(f64) -> bool) -> f64 {
    if !start.is_finite() || ok(start) {
        return start;
    }
    let (mut up, mut down) = (start, start);
    for _ in 0..64 {
        up = up.next_up();
        if ok(up) {
            return up;
        }
        down = down.next_down();
        if ok(down) {
            return down;
        }
    }
    start
}

fn num(v: f64) -> String {
    // `{}` prints the shortest representation that parses back exactly
    format!("{v}")
}

/// Write `net` in the case text format accepted by [`super::parse_case`].
///
/// Branch ids are implicit in row order and at most one load per bus is
/// representable. Served fractions other than 1 go into an optional third
/// `shedcost` column.
pub fn serialize_case(net: &Network) -> String {
    let base = net.base_mva;
    let mut out = String::new();
    let by_bus: HashMap<BusId, &super::Load> = net.loads.iter().map(|l| (l.bus, l)).collect();

    out.push_str("function mpc = grid_case\n\n");
    writeln!(out, "mpc.version = '2';").unwrap();
    writeln!(out, "mpc.baseMVA = {};\n", num(base)).unwrap();

    out.push_str("%% bus data\n");
    out.push_str(
        "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n",
    );
    for b in &net.buses {
        let (pd, qd) = by_bus.get(&b.id).map_or((0.0, 0.0), |l| {
            (undo_div(-l.p_demand, base), undo_div(-l.q_demand, base))
        });
        writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t1\t{}\t0\t0\t1\t{}\t{};",
            b.id,
            b.role.code(),
            num(pd),
            num(qd),
            num(undo_div(b.gs, base)),
            num(undo_div(b.bs, base)),
            num(b.v_setpoint),
            num(b.v_max),
            num(b.v_min),
        )
        .unwrap();
    }
    out.push_str("];\n\n");

    let vset: HashMap<BusId, f64> = net.buses.iter().map(|b| (b.id, b.v_setpoint)).collect();
    out.push_str("%% generator data\n");
    out.push_str("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
    for g in &net.generators {
        writeln!(
            out,
            "\t{}\t{}\t0\t{}\t{}\t{}\t{}\t{}\t{}\t{};",
            g.bus,
            num(undo_div(g.p_dispatch, base)),
            num(undo_div(g.q_max, base)),
            num(undo_div(g.q_min, base)),
            num(vset.get(&g.bus).copied().unwrap_or(1.0)),
            num(base),
            u8::from(g.in_service),
            num(undo_div(g.p_max, base)),
            num(undo_div(g.p_min, base)),
        )
        .unwrap();
    }
    out.push_str("];\n\n");

    out.push_str("%% branch data\n");
    out.push_str(
        "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\nmpc.branch = [\n",
    );
    for br in &net.branches {
        let ratio = if br.is_transformer { br.tap_ratio } else { 0.0 };
        writeln!(
            out,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t0\t0\t{}\t0\t{}\t-360\t360;",
            br.from_bus,
            br.to_bus,
            num(br.r),
            num(br.x),
            num(br.b),
            num(undo_div(br.rating, base)),
            num(ratio),
            u8::from(br.in_service),
        )
        .unwrap();
    }
    out.push_str("];\n\n");

    out.push_str("%% generator cost data\n%\t2\tstartup\tshutdown\tn\tc1\tc0\nmpc.gencost = [\n");
    for g in &net.generators {
        writeln!(
            out,
            "\t2\t0\t0\t2\t{}\t0;",
            num(undo_mul(g.cost_coeff, base))
        )
        .unwrap();
    }
    out.push_str("];\n");

    if !net.loads.is_empty() {
        let with_served = net.loads.iter().any(|l| l.served_fraction != 1.0);
        out.push_str("\n%% load shedding cost\n%\tbus\td");
        out.push_str(if with_served { "\tserved\n" } else { "\n" });
        out.push_str("mpc.shedcost = [\n");
        for l in &net.loads {
            write!(out, "\t{}\t{}", l.bus, num(undo_mul(l.shed_cost, base))).unwrap();
            if with_served {
                write!(out, "\t{}", num(l.served_fraction)).unwrap();
            }
            out.push_str(";\n");
        }
        out.push_str("];\n");
    }
    out
}
