//! Threshold descent over a word tree.
//!
//! A node is internal while its log-weight is not strictly below the
//! threshold; its children are visited in symbol order. The first node on a
//! branch that falls below the threshold is a leaf, and the leaves form a
//! maximal antichain. The top of the tree is expanded breadth-first into
//! independent subtrees that run in parallel; their visitors are merged in
//! subtree order so results do not depend on the thread count.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::antichain::BuildError;
use crate::numeric::strictly_below;
use crate::words::MAX_DEPTH;

/// Subtree count at which breadth-first expansion stops.
const PARALLEL_FRONTIER: usize = 256;

/// Relative slack when checking that weights do not grow along a branch.
const MONOTONE_SLACK: f64 = 1e-12;

pub(crate) trait TreeNode: Sized + Send + Sync {
    type Ctx: Sync;
    fn ln_weight(&self) -> f64;
    fn child(&self, ctx: &Self::Ctx, index: usize) -> Self;
}

pub(crate) trait Visitor<N>: Send {
    fn internal(&mut self, path: &[u16], node: &N) -> Result<(), BuildError>;
    fn leaf(&mut self, path: &[u16], node: &N, parent: Option<&N>) -> Result<(), BuildError>;
    fn merge(&mut self, other: Self);
}

pub(crate) struct Walk<'a, N: TreeNode> {
    pub ctx: &'a N::Ctx,
    pub alphabet: usize,
    pub ln_threshold: f64,
    pub cap: usize,
    pub k: f64,
}

impl<N: TreeNode> Walk<'_, N> {
    pub fn run<V, F>(&self, root: N, make: F) -> Result<V, BuildError>
    where
        V: Visitor<N>,
        F: Fn() -> V + Sync,
    {
        let leaves = AtomicUsize::new(0);
        let mut head = make();
        if strictly_below(root.ln_weight(), self.ln_threshold) {
            self.count(&leaves)?;
            head.leaf(&[], &root, None)?;
            return Ok(head);
        }
        let mut frontier = vec![(Vec::new(), root)];
        while !frontier.is_empty() && frontier.len() < PARALLEL_FRONTIER {
            let mut next = Vec::new();
            for (path, node) in &frontier {
                head.internal(path, node)?;
                self.expand(path, node, &leaves, &mut head, |p, c| {
                    next.push((p, c));
                    Ok(())
                })?;
            }
            frontier = next;
        }
        let parts: Vec<V> = frontier
            .par_iter()
            .map(|(path, node)| {
                let mut v = make();
                self.descend(path, node, &leaves, &mut v)?;
                Ok(v)
            })
            .collect::<Result<_, BuildError>>()?;
        for part in parts {
            head.merge(part);
        }
        Ok(head)
    }

    fn count(&self, leaves: &AtomicUsize) -> Result<(), BuildError> {
        let reached = leaves.fetch_add(1, Ordering::Relaxed) + 1;
        if reached > self.cap {
            return Err(BuildError::CapExceeded {
                cap: self.cap,
                k: self.k,
            });
        }
        Ok(())
    }

    /// Emits the leaf children of `node` and hands internal children to
    /// `internal`.
    fn expand<V: Visitor<N>>(
        &self,
        path: &[u16],
        node: &N,
        leaves: &AtomicUsize,
        visitor: &mut V,
        mut internal: impl FnMut(Vec<u16>, N) -> Result<(), BuildError>,
    ) -> Result<(), BuildError> {
        if path.len() >= MAX_DEPTH {
            return Err(BuildError::TooDeep {
                k: self.k,
                depth: MAX_DEPTH,
            });
        }
        let parent_ln = node.ln_weight();
        for i in 0..self.alphabet {
            let child = node.child(self.ctx, i);
            let child_ln = child.ln_weight();
            if child_ln > parent_ln + MONOTONE_SLACK * parent_ln.abs().max(1.0) {
                let mut word = path.to_vec();
                word.push(i as u16 + 1);
                return Err(BuildError::NotMonotone {
                    word: dotted(&word),
                    ln_parent: parent_ln,
                    ln_child: child_ln,
                });
            }
            let mut child_path = path.to_vec();
            child_path.push(i as u16 + 1);
            if strictly_below(child_ln, self.ln_threshold) {
                self.count(leaves)?;
                visitor.leaf(&child_path, &child, Some(node))?;
            } else {
                internal(child_path, child)?;
            }
        }
        Ok(())
    }

    fn descend<V: Visitor<N>>(
        &self,
        path: &[u16],
        node: &N,
        leaves: &AtomicUsize,
        visitor: &mut V,
    ) -> Result<(), BuildError> {
        visitor.internal(path, node)?;
        let mut pending = Vec::new();
        self.expand(path, node, leaves, visitor, |p, c| {
            pending.push((p, c));
            Ok(())
        })?;
        // Leaves of this node were emitted before its internal children;
        // callers that need lexicographic order sort the collected words.
        for (p, c) in pending {
            self.descend(&p, &c, leaves, visitor)?;
        }
        Ok(())
    }
}

pub(crate) fn dotted(symbols: &[u16]) -> String {
    symbols
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(".")
}
