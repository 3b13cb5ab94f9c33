//! Graphviz export.

use std::fmt::Write;

use crate::automaton::LatticeAutomaton;
use crate::lattice::{Interval, IntervalBox};

/// Six significant digits, `%g` style.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "+inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn interval_label(i: &Interval) -> String {
    let close = if i.is_hi_open() { ')' } else { ']' };
    format!("[{}, {}{close}", fmt_g6(i.lo()), fmt_g6(i.hi()))
}

pub fn box_label(b: &IntervalBox) -> String {
    match b {
        IntervalBox::Bottom => "⊥".into(),
        IntervalBox::Dims(v) if v.len() == 1 => interval_label(&v[0]),
        IntervalBox::Dims(v) => {
            let parts: Vec<String> = v.iter().map(interval_label).collect();
            format!("({})", parts.join(", "))
        }
    }
}

pub fn to_dot(a: &LatticeAutomaton) -> String {
    let mut out = String::from("digraph ila {\n  rankdir=LR;\n");
    for q in a.states() {
        let shape = if a.is_final(q) { "doublecircle" } else { "circle" };
        writeln!(out, "  {q} [shape={shape}];").unwrap();
    }
    for q in a.initial_states() {
        writeln!(out, "  start_{q} [shape=point];").unwrap();
        writeln!(out, "  start_{q} -> {q};").unwrap();
    }
    for t in a.transitions() {
        writeln!(
            out,
            "  {} -> {} [label=\"{}\"];",
            t.source,
            t.target,
            box_label(t.label)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}
