//! Optional structural constraints for decoding under BIO/BIOES tag sets.

use crate::data::tag_shape;

/// Which labels may start, follow one another, and end a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionMask {
    k: usize,
    allowed: Vec<bool>,
    start: Vec<bool>,
    end: Vec<bool>,
}

impl TransitionMask {
    /// Everything permitted.
    pub fn open(k: usize) -> Self {
        TransitionMask {
            k,
            allowed: vec![true; k * k],
            start: vec![true; k],
            end: vec![true; k],
        }
    }

    /// Constraints implied by the label strings. Labels of unknown shape are
    /// left unconstrained.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let k = labels.len();
        let shapes: Vec<Option<(char, String)>> = labels
            .iter()
            .map(|l| tag_shape(l.as_ref()).map(|(p, t)| (p, t.to_string())))
            .collect();
        let bioes = shapes
            .iter()
            .flatten()
            .any(|(p, _)| *p == 'E' || *p == 'S');
        let mut mask = TransitionMask::open(k);
        // An "open" label leaves a span that must be continued.
        let opens = |p: char| if bioes { p == 'B' || p == 'I' } else { false };
        let continues = |p: char| p == 'I' || (bioes && p == 'E');
        for (b, sb) in shapes.iter().enumerate() {
            let Some((pb, _)) = sb else { continue };
            if continues(*pb) {
                mask.start[b] = false;
            }
            if opens(*pb) {
                mask.end[b] = false;
            }
        }
        for (a, sa) in shapes.iter().enumerate() {
            for (b, sb) in shapes.iter().enumerate() {
                let (Some((pa, ta)), Some((pb, tb))) = (sa, sb) else {
                    continue;
                };
                let ok = if continues(*pb) {
                    (*pa == 'B' || *pa == 'I') && ta == tb
                } else {
                    !opens(*pa)
                };
                mask.allowed[a * k + b] = ok;
            }
        }
        mask
    }

    pub fn num_labels(&self) -> usize {
        self.k
    }

    pub fn allowed(&self, prev: usize, next: usize) -> bool {
        self.allowed[prev * self.k + next]
    }

    pub fn start_allowed(&self, label: usize) -> bool {
        self.start[label]
    }

    pub fn end_allowed(&self, label: usize) -> bool {
        self.end[label]
    }
}
