//! Mean-square order conditions.
//!
//! A method has mean-square global order `p` if, with `Δ(τ) = Φ(τ) - φ(τ)`,
//!
//! - `Δ(τ) = O(h^{p+1/2})` in L² for every tree with `ρ(τ) <= p`, and
//! - `E Δ(τ) = O(h^{p+1})` for every tree with `ρ(τ) <= p + 1/2`.
//!
//! The conditions are sufficient only, so a report states a certified lower
//! bound together with the exact leading orders of every defect.

use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::bseries::{ExactSeries, MethodError, MethodSeries, MethodSpec};
use crate::grade::{HalfInt, Order};
use crate::stochalg::{Interp, WordPoly};
use crate::trees::{enumerate_trees, Tree};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("max order must be at least 1/2, got {0}")]
    MaxOrder(HalfInt),
    #[error(transparent)]
    Method(#[from] MethodError),
}

#[derive(Clone, Debug)]
pub struct TreeDefect {
    pub tree: Tree,
    pub rho: HalfInt,
    pub exact: WordPoly,
    pub method: WordPoly,
    /// `Φ(τ) - φ(τ)`.
    pub defect: WordPoly,
    /// Exact L² order of the defect.
    pub l2_order: Order,
    /// Leading exponent of `E[Δ]`.
    pub mean_order: Order,
}

impl TreeDefect {
    fn new(tree: Tree, exact: WordPoly, method: WordPoly) -> Self {
        let defect = method.try_sub(&exact).expect("same tag");
        TreeDefect {
            rho: tree.rho(),
            l2_order: defect.ms_leading_order(),
            mean_order: defect.mean_leading_order(),
            tree,
            exact,
            method,
            defect,
        }
    }

    fn fails_l2(&self, p: HalfInt) -> bool {
        self.rho <= p && self.l2_order < Order::Finite(p + HalfInt::HALF)
    }

    fn fails_mean(&self, p: HalfInt) -> bool {
        self.rho <= p + HalfInt::HALF && self.mean_order < Order::Finite(p + HalfInt::ONE)
    }
}

/// Defect of one tree; the method is read under `interp`.
pub fn defect(spec: &MethodSpec, t: &Tree, interp: Interp) -> Result<TreeDefect, MethodError> {
    Ok(defects(spec, std::slice::from_ref(t), interp)?.remove(0))
}

/// Defects of several trees sharing one set of memo tables.
pub fn defects(spec: &MethodSpec, trees: &[Tree], interp: Interp) -> Result<Vec<TreeDefect>, MethodError> {
    let spec = spec.with_interp(interp);
    let mut exact = ExactSeries::new(interp);
    let mut method = MethodSeries::new(&spec);
    trees
        .iter()
        .map(|t| Ok(TreeDefect::new(t.clone(), exact.phi(t), method.output(t)?)))
        .collect()
}

/// Trees that prevent certifying the next half-order.
#[derive(Clone, Debug, PartialEq)]
pub struct Blocking {
    pub order: HalfInt,
    pub l2_failures: Vec<Tree>,
    pub mean_failures: Vec<Tree>,
}

#[derive(Clone, Debug)]
pub struct OrderReport {
    pub method: String,
    pub interp: Interp,
    pub max_order: HalfInt,
    /// Largest `p <= max_order` satisfying both condition families; the
    /// method has mean-square order at least this value.
    pub certified_order: HalfInt,
    /// Every tree with `ρ <= max_order + 1/2`.
    pub defects: Vec<TreeDefect>,
    /// Failures at `certified_order + 1/2`, when that order was examined.
    pub blocking: Option<Blocking>,
}

pub fn determine_order(spec: &MethodSpec, interp: Interp, max_order: HalfInt) -> Result<OrderReport, AnalysisError> {
    if max_order < HalfInt::HALF {
        return Err(AnalysisError::MaxOrder(max_order));
    }
    let trees = enumerate_trees(max_order + HalfInt::HALF, spec.noises);
    let defects = defects(spec, &trees, interp)?;
    let mut certified = HalfInt::ZERO;
    let mut blocking = None;
    let mut p = HalfInt::HALF;
    while p <= max_order {
        let l2_failures: Vec<Tree> = defects.iter().filter(|d| d.fails_l2(p)).map(|d| d.tree.clone()).collect();
        let mean_failures: Vec<Tree> = defects.iter().filter(|d| d.fails_mean(p)).map(|d| d.tree.clone()).collect();
        if l2_failures.is_empty() && mean_failures.is_empty() {
            certified = p;
            p = p + HalfInt::HALF;
        } else {
            blocking = Some(Blocking { order: p, l2_failures, mean_failures });
            break;
        }
    }
    Ok(OrderReport {
        method: spec.name.clone(),
        interp,
        max_order,
        certified_order: certified,
        defects,
        blocking,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl OrderReport {
    fn is_blocking(&self, t: &Tree) -> bool {
        self.blocking
            .as_ref()
            .is_some_and(|b| b.l2_failures.contains(t) || b.mean_failures.contains(t))
    }

    /// `tree,rho,l2_order,mean_order,blocking`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tree,rho,l2_order,mean_order,blocking\n");
        for d in &self.defects {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&d.tree.to_string()),
                d.rho,
                d.l2_order,
                d.mean_order,
                self.is_blocking(&d.tree)
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct DefectDoc {
            tree: String,
            rho: f64,
            exact: String,
            method: String,
            defect: String,
            l2_order: Order,
            mean_order: Order,
            blocking: bool,
        }
        #[derive(Serialize)]
        struct BlockingDoc {
            order: f64,
            l2_failures: Vec<String>,
            mean_failures: Vec<String>,
        }
        #[derive(Serialize)]
        struct ReportDoc {
            method: String,
            interpretation: Interp,
            max_order: f64,
            certified_order_at_least: f64,
            blocking: Option<BlockingDoc>,
            defects: Vec<DefectDoc>,
        }
        let names = |ts: &[Tree]| ts.iter().map(Tree::to_string).collect();
        let doc = ReportDoc {
            method: self.method.clone(),
            interpretation: self.interp,
            max_order: self.max_order.as_f64(),
            certified_order_at_least: self.certified_order.as_f64(),
            blocking: self.blocking.as_ref().map(|b| BlockingDoc {
                order: b.order.as_f64(),
                l2_failures: names(&b.l2_failures),
                mean_failures: names(&b.mean_failures),
            }),
            defects: self
                .defects
                .iter()
                .map(|d| DefectDoc {
                    tree: d.tree.to_string(),
                    rho: d.rho.as_f64(),
                    exact: d.exact.to_string(),
                    method: d.method.to_string(),
                    defect: d.defect.to_string(),
                    l2_order: d.l2_order,
                    mean_order: d.mean_order,
                    blocking: self.is_blocking(&d.tree),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("reports serialize")
    }
}

impl fmt::Display for OrderReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "method:          {}", self.method)?;
        writeln!(f, "interpretation:  {}", self.interp)?;
        writeln!(f, "max order:       {}", self.max_order)?;
        writeln!(f, "certified order: >= {}", self.certified_order)?;
        match &self.blocking {
            Some(b) => {
                writeln!(f, "order {} not certified:", b.order)?;
                for t in &b.l2_failures {
                    let d = self.defects.iter().find(|d| &d.tree == t).expect("blocking trees are examined");
                    writeln!(f, "  L2 condition fails at {t}: defect of order {} < {}", d.l2_order, b.order + HalfInt::HALF)?;
                }
                for t in &b.mean_failures {
                    let d = self.defects.iter().find(|d| &d.tree == t).expect("blocking trees are examined");
                    writeln!(f, "  mean condition fails at {t}: E[defect] of order {} < {}", d.mean_order, b.order + HalfInt::ONE)?;
                }
            }
            None => writeln!(f, "no failing tree up to the examined order")?,
        }
        writeln!(f)?;
        let rows: Vec<[String; 5]> = self
            .defects
            .iter()
            .map(|d| {
                [d.tree.to_string(), d.rho.to_string(), d.l2_order.to_string(), d.mean_order.to_string(), d.defect.to_string()]
            })
            .collect();
        write_aligned(f, &["tree", "rho", "l2_order", "mean_order", "defect"], &rows)
    }
}

fn write_aligned<const N: usize>(f: &mut impl fmt::Write, header: &[&str; N], rows: &[[String; N]]) -> fmt::Result {
    let mut widths = header.map(|h| h.chars().count());
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |f: &mut dyn fmt::Write, cells: Vec<&str>| -> fmt::Result {
        let mut s = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths.iter()).enumerate() {
            if i + 1 == N {
                s.push_str(cell);
            } else {
                let pad = w - cell.chars().count();
                s.push_str(cell);
                s.push_str(&" ".repeat(pad + 2));
            }
        }
        writeln!(f, "{}", s.trim_end())
    };
    line(f, header.to_vec())?;
    for r in rows {
        line(f, r.iter().map(String::as_str).collect())?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TableRow {
    pub tree: Tree,
    pub rho: HalfInt,
    pub exact: WordPoly,
    pub method: WordPoly,
}

/// Weight functions `φ(τ)` and `Φ(τ)` for every tree with `ρ(τ) <= max_order`.
#[derive(Clone, Debug)]
pub struct WeightTable {
    pub method: String,
    pub interp: Interp,
    pub rows: Vec<TableRow>,
}

pub fn render_table(spec: &MethodSpec, interp: Interp, max_order: HalfInt) -> Result<WeightTable, AnalysisError> {
    if max_order < HalfInt::HALF {
        return Err(AnalysisError::MaxOrder(max_order));
    }
    let trees = enumerate_trees(max_order, spec.noises);
    let rows = defects(spec, &trees, interp)?
        .into_iter()
        .map(|d| TableRow { tree: d.tree, rho: d.rho, exact: d.exact, method: d.method })
        .collect();
    Ok(WeightTable { method: spec.name.clone(), interp, rows })
}

impl WeightTable {
    pub fn to_text(&self) -> String {
        let rows: Vec<[String; 4]> = self
            .rows
            .iter()
            .map(|r| [r.tree.to_string(), r.rho.to_string(), r.exact.to_string(), r.method.to_string()])
            .collect();
        let mut out = String::new();
        write_aligned(&mut out, &["tree", "rho", "phi", "Phi"], &rows).expect("writing to a String");
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("tree,rho,phi,Phi\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&r.tree.to_string()),
                r.rho,
                csv_field(&r.exact.to_string()),
                csv_field(&r.method.to_string())
            );
        }
        out
    }
}
