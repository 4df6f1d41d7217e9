//! Fixed-length program strings and the expression trees they decode to.
//!
//! A program is a continuous gene vector laid out in three blocks:
//!
//! * mask block: one gene per original feature in `[0, 1]`; a gene `>= 0.5`
//!   selects the feature as a terminal candidate,
//! * operator block: one gene per internal slot of the full arity-`NO` tree
//!   of depth `PD` (breadth-first, root first), truncated to an operator id,
//! * link block: one gene per non-root slot in `[0, 2L)`; values below `L`
//!   force the slot to a terminal, values in `[L, 2L)` keep it an operator
//!   unless the slot sits at maximum depth.
//!
//! Search updates move the continuous genes; decoding to discrete genes and
//! building the tree are pure functions of the vector.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Magnitude cap applied at every evaluation step so constructed feature
/// values stay finite.
pub const MAGNITUDE_LIMIT: f64 = 1e150;

/// Denominators below this magnitude trigger protected division.
pub const DIV_EPSILON: f64 = 1e-6;

/// Binary operators available to internal tree nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Add,
    Sub,
    Mul,
    /// Protected division: returns the numerator when the denominator is
    /// within [`DIV_EPSILON`] of zero.
    Div,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Add => "add",
            Operator::Sub => "sub",
            Operator::Mul => "mul",
            Operator::Div => "div",
        }
    }

    pub fn parse(name: &str) -> Result<Operator> {
        match name {
            "add" => Ok(Operator::Add),
            "sub" => Ok(Operator::Sub),
            "mul" => Ok(Operator::Mul),
            "div" => Ok(Operator::Div),
            other => Err(Error::ExprParse(format!("unknown operator '{other}'"))),
        }
    }

    pub fn arity(self) -> usize {
        2
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        let raw = match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
            Operator::Div => {
                if b.abs() < DIV_EPSILON {
                    a
                } else {
                    a / b
                }
            }
        };
        saturate(raw)
    }
}

fn saturate(v: f64) -> f64 {
    v.clamp(-MAGNITUDE_LIMIT, MAGNITUDE_LIMIT)
}

/// Static description of a program string: feature count, tree depth,
/// operand arity, and the operator set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramShape {
    n_features: usize,
    depth: usize,
    arity: usize,
    operators: Vec<Operator>,
}

/// Gene-string length for `n_features` features, tree depth `depth`, and
/// arity `arity`: the mask block plus one link gene per non-root slot plus
/// one operator gene per internal slot of the full tree.
pub fn dimension(n_features: usize, depth: usize, arity: usize) -> Result<usize> {
    if n_features < 1 {
        return Err(Error::InvalidArgument("n_features must be >= 1".into()));
    }
    if depth < 1 {
        return Err(Error::InvalidArgument("depth must be >= 1".into()));
    }
    if arity < 2 {
        return Err(Error::InvalidArgument("arity must be >= 2".into()));
    }
    let mut links = 0usize;
    for level in 1..=depth {
        links += arity.pow(level as u32);
    }
    let mut internal = 0usize;
    for level in 0..depth {
        internal += arity.pow(level as u32);
    }
    Ok(n_features + links + internal)
}

impl ProgramShape {
    pub fn new(n_features: usize, depth: usize, arity: usize, operators: Vec<Operator>) -> Result<Self> {
        dimension(n_features, depth, arity)?;
        if operators.is_empty() {
            return Err(Error::InvalidArgument("operator set must not be empty".into()));
        }
        if let Some(op) = operators.iter().find(|op| op.arity() != arity) {
            return Err(Error::InvalidArgument(format!(
                "operator '{}' has arity {}, shape requires {arity}",
                op.name(),
                op.arity()
            )));
        }
        Ok(Self {
            n_features,
            depth,
            arity,
            operators,
        })
    }

    /// Default shape: depth 3, arity 2, all four operators.
    pub fn with_defaults(n_features: usize) -> Result<Self> {
        Self::new(n_features, 3, 2, Operator::ALL.to_vec())
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    /// Number of internal-node slots (tree levels `0..depth`).
    pub fn internal_slots(&self) -> usize {
        (0..self.depth).map(|l| self.arity.pow(l as u32)).sum()
    }

    /// Number of non-root slots (tree levels `1..=depth`).
    pub fn link_slots(&self) -> usize {
        (1..=self.depth).map(|l| self.arity.pow(l as u32)).sum()
    }

    /// Total gene-string length.
    pub fn dimension(&self) -> usize {
        self.n_features + self.internal_slots() + self.link_slots()
    }

    /// Inclusive clamp range for gene `d`.
    pub fn gene_range(&self, d: usize) -> (f64, f64) {
        if d < self.n_features {
            (0.0, 1.0)
        } else if d < self.n_features + self.internal_slots() {
            (0.0, self.operators.len() as f64)
        } else {
            (0.0, 2.0 * self.n_features as f64)
        }
    }

    /// Per-gene clamp ranges in layout order, for use by the search engine.
    pub fn bounds(&self) -> GeneBounds {
        GeneBounds {
            ranges: (0..self.dimension()).map(|d| self.gene_range(d)).collect(),
        }
    }

    /// Draw a position with every gene uniform inside its block range.
    pub fn random_position(&self, rng: &mut impl Rng) -> Position {
        let genes = (0..self.dimension())
            .map(|d| {
                let (lo, hi) = self.gene_range(d);
                rng.random_range(lo..hi)
            })
            .collect();
        Position { genes }
    }
}

/// Per-gene inclusive clamp ranges, decoupled from the shape so the search
/// engine stays agnostic of the genome layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneBounds {
    ranges: Vec<(f64, f64)>,
}

impl GeneBounds {
    pub fn from_ranges(ranges: Vec<(f64, f64)>) -> Self {
        Self { ranges }
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn clamp_gene(&self, d: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[d];
        v.clamp(lo, hi)
    }

    pub fn range(&self, d: usize) -> (f64, f64) {
        self.ranges[d]
    }
}

/// Continuous gene vector of a single program. Serializes as a bare array,
/// which is also its wire form in federation messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position {
    genes: Vec<f64>,
}

impl Position {
    pub fn from_genes(genes: Vec<f64>) -> Self {
        Self { genes }
    }

    pub fn genes(&self) -> &[f64] {
        &self.genes
    }

    pub fn genes_mut(&mut self) -> &mut [f64] {
        &mut self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

/// Discrete view of a position: mask bits, operator ids (breadth-first,
/// root first), and link values (breadth-first over non-root slots).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedProgram {
    pub mask: Vec<bool>,
    pub op_genes: Vec<usize>,
    pub link_genes: Vec<usize>,
}

impl DecodedProgram {
    /// Total decoded gene count (mask + operator + link).
    pub fn len(&self) -> usize {
        self.mask.len() + self.op_genes.len() + self.link_genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decode a continuous position into discrete genes. Pure and total for a
/// position whose length matches the shape.
pub fn decode(pos: &Position, shape: &ProgramShape) -> Result<DecodedProgram> {
    if pos.len() != shape.dimension() {
        return Err(Error::LengthMismatch {
            expected: shape.dimension(),
            got: pos.len(),
        });
    }
    let l = shape.n_features();
    let internal = shape.internal_slots();
    let n_ops = shape.operators().len();
    let mask = pos.genes()[..l].iter().map(|&g| g >= 0.5).collect();
    let op_genes = pos.genes()[l..l + internal]
        .iter()
        .map(|&g| (g.floor() as isize).clamp(0, n_ops as isize - 1) as usize)
        .collect();
    let link_genes = pos.genes()[l + internal..]
        .iter()
        .map(|&g| (g.floor() as isize).clamp(0, 2 * l as isize - 1) as usize)
        .collect();
    Ok(DecodedProgram {
        mask,
        op_genes,
        link_genes,
    })
}

/// Count of decoded gene positions (mask bits, operator ids, link values)
/// where two programs differ.
pub fn hamming(a: &DecodedProgram, b: &DecodedProgram) -> Result<usize> {
    if a.mask.len() != b.mask.len()
        || a.op_genes.len() != b.op_genes.len()
        || a.link_genes.len() != b.link_genes.len()
    {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(hamming_unchecked(a, b))
}

pub(crate) fn hamming_unchecked(a: &DecodedProgram, b: &DecodedProgram) -> usize {
    let mask = a.mask.iter().zip(&b.mask).filter(|(x, y)| x != y).count();
    let ops = a
        .op_genes
        .iter()
        .zip(&b.op_genes)
        .filter(|(x, y)| x != y)
        .count();
    let links = a
        .link_genes
        .iter()
        .zip(&b.link_genes)
        .filter(|(x, y)| x != y)
        .count();
    mask + ops + links
}

/// One constructed feature: an operator tree over mask-selected original
/// features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpressionTree {
    Terminal(usize),
    Operator(Operator, Vec<ExpressionTree>),
}

impl ExpressionTree {
    pub fn depth(&self) -> usize {
        match self {
            ExpressionTree::Terminal(_) => 0,
            ExpressionTree::Operator(_, children) => {
                1 + children.iter().map(ExpressionTree::depth).max().unwrap_or(0)
            }
        }
    }

    /// Largest feature index referenced by any terminal.
    pub fn max_feature_index(&self) -> usize {
        match self {
            ExpressionTree::Terminal(i) => *i,
            ExpressionTree::Operator(_, children) => children
                .iter()
                .map(ExpressionTree::max_feature_index)
                .max()
                .unwrap_or(0),
        }
    }

    /// All terminal feature indices, in evaluation order.
    pub fn terminal_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        fn walk(t: &ExpressionTree, out: &mut Vec<usize>) {
            match t {
                ExpressionTree::Terminal(i) => out.push(*i),
                ExpressionTree::Operator(_, children) => {
                    for c in children {
                        walk(c, out);
                    }
                }
            }
        }
        walk(self, &mut out);
        out
    }

    fn eval_row(&self, row: &[f64]) -> f64 {
        match self {
            ExpressionTree::Terminal(i) => saturate(row[*i]),
            ExpressionTree::Operator(op, children) => {
                let a = children[0].eval_row(row);
                let b = children[1].eval_row(row);
                op.apply(a, b)
            }
        }
    }
}

/// Build the expression tree a decoded program denotes.
///
/// The root slot is always an operator. Every other slot consults its link
/// gene `v`: at maximum depth the slot is forced to a terminal; otherwise a
/// value below `L` makes it a terminal and a value in `[L, 2L)` makes it an
/// operator. Terminals map `v` onto the mask-selected features by
/// `v mod n_selected`.
pub fn build_tree(dp: &DecodedProgram, shape: &ProgramShape) -> Result<ExpressionTree> {
    let selected: Vec<usize> = dp
        .mask
        .iter()
        .enumerate()
        .filter(|(_, &set)| set)
        .map(|(i, _)| i)
        .collect();
    if selected.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(build_slot(dp, shape, &selected, 0, 0))
}

/// `slot` is the breadth-first index into the full arity-`NO` tree; operator
/// genes are indexed by slot directly, link genes by `slot - 1`.
fn build_slot(
    dp: &DecodedProgram,
    shape: &ProgramShape,
    selected: &[usize],
    slot: usize,
    level: usize,
) -> ExpressionTree {
    let arity = shape.arity();
    let is_terminal = if slot == 0 {
        false
    } else {
        let link = dp.link_genes[slot - 1];
        level == shape.depth() || link < shape.n_features()
    };
    if is_terminal {
        let link = dp.link_genes[slot - 1];
        ExpressionTree::Terminal(selected[link % selected.len()])
    } else {
        let children = (0..arity)
            .map(|j| build_slot(dp, shape, selected, slot * arity + 1 + j, level + 1))
            .collect();
        ExpressionTree::Operator(shape.operators()[dp.op_genes[slot]], children)
    }
}

/// Evaluate a constructed feature over every row of a sample matrix.
/// Protected operators and magnitude saturation keep every output finite.
pub fn evaluate_feature(tree: &ExpressionTree, rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().map(|row| tree.eval_row(row)).collect()
}

/// Prefix-notation rendering, e.g. `(div (add f3 f7) f1)`. Structurally
/// equal trees render identically.
pub fn canonical_string(tree: &ExpressionTree) -> String {
    let mut out = String::new();
    render(tree, &mut out);
    out
}

fn render(tree: &ExpressionTree, out: &mut String) {
    match tree {
        ExpressionTree::Terminal(i) => {
            let _ = write!(out, "f{i}");
        }
        ExpressionTree::Operator(op, children) => {
            let _ = write!(out, "({}", op.name());
            for c in children {
                out.push(' ');
                render(c, out);
            }
            out.push(')');
        }
    }
}

/// Parse the canonical prefix notation back into a tree. Inverse of
/// [`canonical_string`] on its image.
pub fn parse_expression(text: &str) -> Result<ExpressionTree> {
    let mut tokens = tokenize(text);
    let tree = parse_node(&mut tokens)?;
    if let Some(extra) = tokens.first() {
        return Err(Error::ExprParse(format!("unexpected trailing token '{extra}'")));
    }
    Ok(tree)
}

fn tokenize(text: &str) -> Vec<String> {
    let spaced = text.replace('(', " ( ").replace(')', " ) ");
    spaced.split_whitespace().map(str::to_owned).rev().collect()
}

fn parse_node(tokens: &mut Vec<String>) -> Result<ExpressionTree> {
    let token = tokens
        .pop()
        .ok_or_else(|| Error::ExprParse("unexpected end of expression".into()))?;
    if token == "(" {
        let op_name = tokens
            .pop()
            .ok_or_else(|| Error::ExprParse("missing operator after '('".into()))?;
        let op = Operator::parse(&op_name)?;
        let mut children = Vec::new();
        loop {
            match tokens.last().map(String::as_str) {
                Some(")") => {
                    tokens.pop();
                    break;
                }
                Some(_) => children.push(parse_node(tokens)?),
                None => return Err(Error::ExprParse("missing ')'".into())),
            }
        }
        if children.len() != op.arity() {
            return Err(Error::ExprParse(format!(
                "operator '{}' expects {} operands, got {}",
                op.name(),
                op.arity(),
                children.len()
            )));
        }
        Ok(ExpressionTree::Operator(op, children))
    } else if let Some(rest) = token.strip_prefix('f') {
        let idx: usize = rest
            .parse()
            .map_err(|_| Error::ExprParse(format!("bad terminal '{token}'")))?;
        Ok(ExpressionTree::Terminal(idx))
    } else {
        Err(Error::ExprParse(format!("unexpected token '{token}'")))
    }
}
