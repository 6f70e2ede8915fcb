//! Expression trees representing similarity functions over a pair of
//! instances, plus random generation and the s-expression text format.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Binary operators plus the ternary `If`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    /// Protected division: returns 1 when the divisor is exactly zero.
    ProtDiv,
    AbsAdd,
    AbsSub,
    Max,
    Min,
    /// Outputs the second input if the first is positive, else the third.
    If,
}

pub const ALL_OPS: [Op; 9] = [
    Op::Add,
    Op::Sub,
    Op::Mul,
    Op::ProtDiv,
    Op::AbsAdd,
    Op::AbsSub,
    Op::Max,
    Op::Min,
    Op::If,
];

impl Op {
    pub fn arity(self) -> usize {
        match self {
            Op::If => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::ProtDiv => "div",
            Op::AbsAdd => "absadd",
            Op::AbsSub => "abssub",
            Op::Max => "max",
            Op::Min => "min",
            Op::If => "if",
        }
    }

    fn from_name(name: &str) -> Option<Op> {
        ALL_OPS.iter().copied().find(|op| op.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    /// Reads feature `index` of instance 0 or 1 of the pair under evaluation.
    Feature { instance: u8, index: usize },
    Constant(f64),
    Call { op: Op, children: Vec<ExprNode> },
}

impl ExprNode {
    pub fn eval(&self, left: &[f64], right: &[f64]) -> f64 {
        match self {
            ExprNode::Feature { instance, index } => {
                if *instance == 0 {
                    left[*index]
                } else {
                    right[*index]
                }
            }
            ExprNode::Constant(v) => *v,
            ExprNode::Call { op, children } => {
                let a = children[0].eval(left, right);
                match op {
                    Op::Add => a + children[1].eval(left, right),
                    Op::Sub => a - children[1].eval(left, right),
                    Op::Mul => a * children[1].eval(left, right),
                    Op::ProtDiv => {
                        let b = children[1].eval(left, right);
                        if b == 0.0 {
                            1.0
                        } else {
                            a / b
                        }
                    }
                    Op::AbsAdd => (a + children[1].eval(left, right)).abs(),
                    Op::AbsSub => (a - children[1].eval(left, right)).abs(),
                    Op::Max => a.max(children[1].eval(left, right)),
                    Op::Min => a.min(children[1].eval(left, right)),
                    Op::If => {
                        if a > 0.0 {
                            children[1].eval(left, right)
                        } else {
                            children[2].eval(left, right)
                        }
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ExprNode::Call { children, .. } => {
                1 + children.iter().map(ExprNode::depth).max().unwrap()
            }
            _ => 1,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            ExprNode::Call { children, .. } => {
                1 + children.iter().map(ExprNode::node_count).sum::<usize>()
            }
            _ => 1,
        }
    }

    fn collect_features(&self, out: &mut BTreeSet<usize>) {
        match self {
            ExprNode::Feature { index, .. } => {
                out.insert(*index);
            }
            ExprNode::Call { children, .. } => {
                for c in children {
                    c.collect_features(out);
                }
            }
            ExprNode::Constant(_) => {}
        }
    }

    /// Largest feature index referenced, if any.
    fn max_feature_index(&self) -> Option<usize> {
        match self {
            ExprNode::Feature { index, .. } => Some(*index),
            ExprNode::Constant(_) => None,
            ExprNode::Call { children, .. } => {
                children.iter().filter_map(ExprNode::max_feature_index).max()
            }
        }
    }

    fn get(&self, target: usize, counter: &mut usize) -> Option<&ExprNode> {
        if *counter == target {
            return Some(self);
        }
        *counter += 1;
        if let ExprNode::Call { children, .. } = self {
            for c in children {
                if let Some(found) = c.get(target, counter) {
                    return Some(found);
                }
            }
        }
        None
    }

    fn replace(&mut self, target: usize, counter: &mut usize, new: &mut Option<ExprNode>) {
        if *counter == target {
            *self = new.take().unwrap();
            return;
        }
        *counter += 1;
        if let ExprNode::Call { children, .. } = self {
            for c in children {
                if new.is_none() {
                    return;
                }
                c.replace(target, counter, new);
            }
        }
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            ExprNode::Feature { instance, index } => {
                write!(out, "(f {instance} {index})").unwrap();
            }
            ExprNode::Constant(v) => {
                write!(out, "(const {v})").unwrap();
            }
            ExprNode::Call { op, children } => {
                write!(out, "({}", op.name()).unwrap();
                for c in children {
                    out.push(' ');
                    c.write_sexpr(out);
                }
                out.push(')');
            }
        }
    }

    /// Folds subtrees whose leaves are all constants into a single constant.
    fn fold_constants(&self) -> ExprNode {
        match self {
            ExprNode::Call { op, children } => {
                let folded: Vec<ExprNode> = children.iter().map(Self::fold_constants).collect();
                if folded.iter().all(|c| matches!(c, ExprNode::Constant(_))) {
                    let node = ExprNode::Call {
                        op: *op,
                        children: folded.clone(),
                    };
                    let v = node.eval(&[], &[]);
                    if v.is_finite() {
                        return ExprNode::Constant(v);
                    }
                    return node;
                }
                ExprNode::Call {
                    op: *op,
                    children: folded,
                }
            }
            other => other.clone(),
        }
    }
}

/// A similarity function: takes the feature rows of two instances and
/// returns a real score (higher means more similar).
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    root: ExprNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowMethod {
    Grow,
    Full,
}

impl ExprTree {
    pub fn new(root: ExprNode) -> ExprTree {
        ExprTree { root }
    }

    pub fn root(&self) -> &ExprNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Instance `i0` is fed to the tree as instance 0 and `i1` as instance 1;
    /// the evaluation is deliberately asymmetric.
    pub fn eval(&self, ds: &Dataset, i0: usize, i1: usize) -> f64 {
        self.root.eval(ds.row(i0), ds.row(i1))
    }

    /// Set of distinct feature indices referenced by the tree.
    pub fn features_used(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.root.collect_features(&mut out);
        out
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        self.root.max_feature_index()
    }

    /// Pre-order subtree access; index 0 is the root.
    pub fn subtree(&self, index: usize) -> Option<&ExprNode> {
        let mut counter = 0;
        self.root.get(index, &mut counter)
    }

    /// Replaces the subtree at pre-order `index` with `new`.
    pub fn replace_subtree(&mut self, index: usize, new: ExprNode) {
        let mut counter = 0;
        let mut slot = Some(new);
        self.root.replace(index, &mut counter, &mut slot);
    }

    /// Depth of the node at pre-order `index` (root is 1).
    pub fn node_depth(&self, index: usize) -> Option<usize> {
        fn walk(node: &ExprNode, depth: usize, target: usize, counter: &mut usize) -> Option<usize> {
            if *counter == target {
                return Some(depth);
            }
            *counter += 1;
            if let ExprNode::Call { children, .. } = node {
                for c in children {
                    if let Some(d) = walk(c, depth + 1, target, counter) {
                        return Some(d);
                    }
                }
            }
            None
        }
        let mut counter = 0;
        walk(&self.root, 1, index, &mut counter)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        self.root.write_sexpr(&mut out);
        out
    }

    pub fn parse(text: &str) -> Result<ExprTree> {
        let mut parser = Parser {
            text: text.as_bytes(),
            pos: 0,
        };
        let root = parser.parse_node()?;
        parser.skip_ws();
        if parser.pos != parser.text.len() {
            return Err(Error::parse(
                format!("offset {}", parser.pos),
                "trailing input after expression",
            ));
        }
        Ok(ExprTree { root })
    }

    /// Best-effort simplification: constant folding only.
    pub fn simplify(&self) -> ExprTree {
        ExprTree {
            root: self.root.fold_constants(),
        }
    }
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(format!("offset {}", self.pos), message)
    }

    fn expect(&mut self, byte: u8) -> Result<()> {
        if self.pos < self.text.len() && self.text[self.pos] == byte {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {:?}", byte as char)))
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.text.len()
            && !self.text[self.pos].is_ascii_whitespace()
            && self.text[self.pos] != b'('
            && self.text[self.pos] != b')'
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a token"));
        }
        Ok(std::str::from_utf8(&self.text[start..self.pos]).unwrap())
    }

    fn parse_node(&mut self) -> Result<ExprNode> {
        self.skip_ws();
        self.expect(b'(')?;
        let head_pos = self.pos;
        let head = self.token()?;
        let node = match head {
            "f" => {
                let inst_pos = self.pos;
                let inst: u8 = self
                    .token()?
                    .parse()
                    .map_err(|_| Error::parse(format!("offset {inst_pos}"), "expected 0 or 1"))?;
                if inst > 1 {
                    return Err(Error::parse(
                        format!("offset {inst_pos}"),
                        "instance must be 0 or 1",
                    ));
                }
                let idx_pos = self.pos;
                let index: usize = self.token()?.parse().map_err(|_| {
                    Error::parse(format!("offset {idx_pos}"), "expected a feature index")
                })?;
                ExprNode::Feature { instance: inst, index }
            }
            "const" => {
                let val_pos = self.pos;
                let value: f64 = self
                    .token()?
                    .parse()
                    .map_err(|_| Error::parse(format!("offset {val_pos}"), "expected a float"))?;
                ExprNode::Constant(value)
            }
            name => {
                let op = Op::from_name(name).ok_or_else(|| {
                    Error::parse(format!("offset {head_pos}"), format!("unknown operator {name:?}"))
                })?;
                let mut children = Vec::with_capacity(op.arity());
                for _ in 0..op.arity() {
                    self.skip_ws();
                    if self.pos < self.text.len() && self.text[self.pos] == b')' {
                        return Err(self.err(format!(
                            "operator {name:?} takes {} arguments",
                            op.arity()
                        )));
                    }
                    children.push(self.parse_node()?);
                }
                ExprNode::Call { op, children }
            }
        };
        self.skip_ws();
        self.expect(b')')?;
        Ok(node)
    }
}

/// Builds a random tree. `Full` places terminals only at `max` depth; `Grow`
/// may stop at any depth in `[min, max]`. Terminals are drawn uniformly over
/// the `2m` feature references plus the constant terminal; constants are
/// uniform in `[-1, 1]`.
pub fn random_tree(
    rng: &mut impl Rng,
    m: usize,
    depth_bounds: (usize, usize),
    method: GrowMethod,
) -> ExprTree {
    let (min, max) = depth_bounds;
    assert!(max >= min && min >= 2, "depth bounds must satisfy max >= min >= 2");
    ExprTree {
        root: random_node(rng, m, 1, min, max, method),
    }
}

pub(crate) fn random_node(
    rng: &mut impl Rng,
    m: usize,
    depth: usize,
    min: usize,
    max: usize,
    method: GrowMethod,
) -> ExprNode {
    let force_terminal = depth == max;
    let force_function = depth < min || (method == GrowMethod::Full && depth < max);
    let terminal = if force_terminal {
        true
    } else if force_function {
        false
    } else {
        // Grow, inside [min, max): terminal with the same probability a
        // terminal is picked from the combined primitive set.
        let n_terminals = 2 * m + 1;
        rng.random_range(0..n_terminals + ALL_OPS.len()) < n_terminals
    };
    if terminal {
        random_terminal(rng, m)
    } else {
        let op = ALL_OPS[rng.random_range(0..ALL_OPS.len())];
        let children = (0..op.arity())
            .map(|_| random_node(rng, m, depth + 1, min, max, method))
            .collect();
        ExprNode::Call { op, children }
    }
}

fn random_terminal(rng: &mut impl Rng, m: usize) -> ExprNode {
    let choice = rng.random_range(0..2 * m + 1);
    if choice < 2 * m {
        ExprNode::Feature {
            instance: (choice % 2) as u8,
            index: choice / 2,
        }
    } else {
        ExprNode::Constant(rng.random_range(-1.0..=1.0))
    }
}

/// A GP individual: `t >= 1` similarity trees whose outputs are summed.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub trees: Vec<ExprTree>,
    pub cached_fitness: Option<f64>,
}

impl Individual {
    pub fn new(trees: Vec<ExprTree>) -> Individual {
        assert!(!trees.is_empty());
        Individual {
            trees,
            cached_fitness: None,
        }
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Sum of the per-tree similarities. NaN from any tree propagates.
    pub fn eval(&self, ds: &Dataset, i0: usize, i1: usize) -> f64 {
        self.trees.iter().map(|t| t.eval(ds, i0, i1)).sum()
    }

    pub fn features_used(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for t in &self.trees {
            t.root.collect_features(&mut out);
        }
        out
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        self.trees.iter().filter_map(ExprTree::max_feature_index).max()
    }

    /// Model text: a `trees=<t>` header followed by one s-expression per line.
    pub fn to_model_string(&self) -> String {
        let mut out = format!("trees={}\n", self.trees.len());
        for t in &self.trees {
            out.push_str(&t.serialize());
            out.push('\n');
        }
        out
    }

    pub fn from_model_string(text: &str) -> Result<Individual> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse("line 1", "empty model file"))?;
        let t: usize = header
            .strip_prefix("trees=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse("line 1", "expected header `trees=<t>`"))?;
        if t == 0 {
            return Err(Error::parse("line 1", "a model needs at least one tree"));
        }
        let mut trees = Vec::with_capacity(t);
        for i in 0..t {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(format!("line {}", i + 2), "missing tree"))?;
            trees.push(ExprTree::parse(line)?);
        }
        Ok(Individual::new(trees))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_ds(a: &[f64], b: &[f64]) -> Dataset {
        Dataset::from_rows(vec![a.to_vec(), b.to_vec()], None).unwrap()
    }

    fn eval_str(expr: &str, a: &[f64], b: &[f64]) -> f64 {
        ExprTree::parse(expr).unwrap().eval(&pair_ds(a, b), 0, 1)
    }

    #[test]
    fn protected_division() {
        assert_eq!(eval_str("(div (const 6) (const 3))", &[0.0], &[0.0]), 2.0);
        assert_eq!(eval_str("(div (const 5) (const 0))", &[0.0], &[0.0]), 1.0);
    }

    #[test]
    fn if_selects_third_on_nonpositive() {
        assert_eq!(
            eval_str("(if (const -1) (const 2) (const 3))", &[0.0], &[0.0]),
            3.0
        );
        assert_eq!(
            eval_str("(if (const 0) (const 2) (const 3))", &[0.0], &[0.0]),
            3.0
        );
        assert_eq!(
            eval_str("(if (const 1) (const 2) (const 3))", &[0.0], &[0.0]),
            2.0
        );
    }

    #[test]
    fn abs_ops() {
        assert!((eval_str("(abssub (const 0.2) (const 0.7))", &[0.0], &[0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(eval_str("(absadd (const -2) (const -3))", &[0.0], &[0.0]), 5.0);
    }

    #[test]
    fn feature_refs_read_the_right_instance() {
        assert_eq!(eval_str("(f 0 1)", &[10.0, 20.0], &[30.0, 40.0]), 20.0);
        assert_eq!(eval_str("(f 1 0)", &[10.0, 20.0], &[30.0, 40.0]), 30.0);
    }

    #[test]
    fn figure_expression_parses_and_roundtrips() {
        let text = "(sub (max (add (f 0 1) (f 1 1)) (abssub (f 1 5) (f 0 2))) (f 0 3))";
        let tree = ExprTree::parse(text).unwrap();
        assert_eq!(tree.depth(), 4);
        assert_eq!(tree.serialize(), text);
        assert_eq!(
            tree.features_used().into_iter().collect::<Vec<_>>(),
            vec![1, 2, 3, 5]
        );
    }

    #[test]
    fn parse_arity_error() {
        let err = ExprTree::parse("(add (f 0 0))").unwrap_err();
        assert!(err.to_string().contains("2 arguments"), "{err}");
    }

    #[test]
    fn parse_error_has_position() {
        let err = ExprTree::parse("(bogus 1 2)").unwrap_err();
        assert!(err.to_string().contains("offset 1"), "{err}");
    }

    #[test]
    fn individual_sums_trees() {
        let ind = Individual::new(vec![
            ExprTree::parse("(const 1.5)").unwrap(),
            ExprTree::parse("(const -0.5)").unwrap(),
        ]);
        assert_eq!(ind.eval(&pair_ds(&[0.0], &[0.0]), 0, 1), 1.0);
    }

    #[test]
    fn nan_propagates_through_sum() {
        let ind = Individual::new(vec![
            ExprTree::parse("(const 1)").unwrap(),
            ExprTree::new(ExprNode::Constant(f64::NAN)),
        ]);
        assert!(ind.eval(&pair_ds(&[0.0], &[0.0]), 0, 1).is_nan());
    }

    #[test]
    fn full_trees_have_all_leaves_at_max_depth() {
        fn leaf_depths(node: &ExprNode, depth: usize, out: &mut Vec<usize>) {
            match node {
                ExprNode::Call { children, .. } => {
                    for c in children {
                        leaf_depths(c, depth + 1, out);
                    }
                }
                _ => out.push(depth),
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let tree = random_tree(&mut rng, 3, (2, 2), GrowMethod::Full);
            let mut depths = Vec::new();
            leaf_depths(tree.root(), 1, &mut depths);
            assert!(depths.iter().all(|&d| d == 2));
        }
    }

    #[test]
    fn random_trees_respect_depth_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(min, max) in &[(2usize, 5usize), (2, 7)] {
            for i in 0..10_000 {
                let method = if i % 2 == 0 { GrowMethod::Grow } else { GrowMethod::Full };
                let d = random_tree(&mut rng, 4, (min, max), method).depth();
                assert!(d >= min && d <= max, "depth {d} outside [{min},{max}]");
            }
        }
    }

    #[test]
    fn fixed_seed_gives_identical_trees() {
        let a = random_tree(&mut ChaCha8Rng::seed_from_u64(9), 5, (2, 6), GrowMethod::Grow);
        let b = random_tree(&mut ChaCha8Rng::seed_from_u64(9), 5, (2, 6), GrowMethod::Grow);
        assert_eq!(a.serialize(), b.serialize());
    }

    #[test]
    fn model_string_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ind = Individual::new(
            (0..3)
                .map(|_| random_tree(&mut rng, 4, (2, 5), GrowMethod::Grow))
                .collect(),
        );
        let text = ind.to_model_string();
        assert!(text.starts_with("trees=3\n"));
        let back = Individual::from_model_string(&text).unwrap();
        assert_eq!(back.trees, ind.trees);
    }

    #[test]
    fn simplify_folds_constant_subtrees() {
        let tree = ExprTree::parse("(add (mul (const 2) (const 3)) (f 0 0))").unwrap();
        assert_eq!(tree.simplify().serialize(), "(add (const 6) (f 0 0))");
    }
}
