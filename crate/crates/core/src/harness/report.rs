//! Per-step latency report.

use super::latency::{components, format_ns, Component, LatencyModel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub step: usize,
    pub line: usize,
    pub label: String,
    pub opcode: Option<u8>,
    pub outcome: String,
    /// Charge per component, indexed like [`Component::ALL`].
    pub by_component: [u64; 6],
}

impl ReportRow {
    pub fn new(step: usize, line: usize, label: String, opcode: Option<u8>, outcome: String, model: &LatencyModel) -> Self {
        let mut by_component = [0u64; 6];
        if let Some(op) = opcode {
            for &c in components(op) {
                by_component[c as usize] += model.get(c);
            }
        }
        Self {
            step,
            line,
            label,
            opcode,
            outcome,
            by_component,
        }
    }

    pub fn total_ps(&self) -> u64 {
        self.by_component.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LatencyReport {
    pub rows: Vec<ReportRow>,
}

impl LatencyReport {
    pub fn total_ps(&self) -> u64 {
        self.rows.iter().map(ReportRow::total_ps).sum()
    }

    pub fn component_total_ps(&self, c: Component) -> u64 {
        self.rows.iter().map(|r| r.by_component[c as usize]).sum()
    }

    /// Rows whose opcode lies in `ops`.
    pub fn rows_for<'a>(&'a self, ops: &'a [u8]) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.opcode.is_some_and(|o| ops.contains(&o)))
    }

    /// Tab-separated table: one row per step, then per-component totals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tline\tlabel\toutcome\tns");
        for c in Component::ALL {
            out.push('\t');
            out.push_str(c.name());
        }
        out.push('\n');
        let push_row = |out: &mut String, cells: [&str; 4], total: u64, comps: &[u64; 6]| {
            out.push_str(&cells.join("\t"));
            out.push('\t');
            out.push_str(&format_ns(total));
            for v in comps {
                out.push('\t');
                out.push_str(&format_ns(*v));
            }
            out.push('\n');
        };
        for r in &self.rows {
            push_row(
                &mut out,
                [&r.step.to_string(), &r.line.to_string(), &r.label, &r.outcome],
                r.total_ps(),
                &r.by_component,
            );
        }
        let mut totals = [0u64; 6];
        for c in Component::ALL {
            totals[c as usize] = self.component_total_ps(c);
        }
        push_row(&mut out, ["total", "", "", ""], self.total_ps(), &totals);
        out
    }
}
