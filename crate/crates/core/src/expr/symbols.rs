use std::collections::BTreeMap;
use std::fmt;

/// Role of a coordinate symbol. Indices are zero-based; names are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoordRole {
    /// `t{A}`
    Time { a: usize },
    /// `q{i}`
    Base { i: usize },
    /// `v{i}_{A}`
    Velocity { i: usize, a: usize },
    /// `p{A}_{i}`
    Momentum { a: usize, i: usize },
    /// `y{alpha}_{A}`
    AlgVelocity { alpha: usize, a: usize },
    /// `w{A}_{alpha}`
    AlgMomentum { a: usize, alpha: usize },
    /// `vt{A}_{B}`: component of the A-th lifted vector along dt^B.
    LiftTime { a: usize, b: usize },
    /// `vq{A}_{i}`
    LiftBase { a: usize, i: usize },
    /// `vp{A}_{B}_{i}`
    LiftMomentum { a: usize, b: usize, i: usize },
}

impl CoordRole {
    pub fn name(&self) -> String {
        match *self {
            CoordRole::Time { a } => format!("t{}", a + 1),
            CoordRole::Base { i } => format!("q{}", i + 1),
            CoordRole::Velocity { i, a } => format!("v{}_{}", i + 1, a + 1),
            CoordRole::Momentum { a, i } => format!("p{}_{}", a + 1, i + 1),
            CoordRole::AlgVelocity { alpha, a } => format!("y{}_{}", alpha + 1, a + 1),
            CoordRole::AlgMomentum { a, alpha } => format!("w{}_{}", a + 1, alpha + 1),
            CoordRole::LiftTime { a, b } => format!("vt{}_{}", a + 1, b + 1),
            CoordRole::LiftBase { a, i } => format!("vq{}_{}", a + 1, i + 1),
            CoordRole::LiftMomentum { a, b, i } => format!("vp{}_{}_{}", a + 1, b + 1, i + 1),
        }
    }

    /// Parses a canonical coordinate name. Returns `None` for anything else.
    pub fn parse(name: &str) -> Option<CoordRole> {
        let (prefix, rest) = split_prefix(name)?;
        let idx: Vec<usize> = rest
            .split('_')
            .map(|s| {
                if s.is_empty() || s.starts_with('0') || !s.bytes().all(|b| b.is_ascii_digit()) {
                    None
                } else {
                    s.parse::<usize>().ok().map(|v| v - 1)
                }
            })
            .collect::<Option<Vec<_>>>()?;
        match (prefix, idx.as_slice()) {
            ("t", [a]) => Some(CoordRole::Time { a: *a }),
            ("q", [i]) => Some(CoordRole::Base { i: *i }),
            ("v", [i, a]) => Some(CoordRole::Velocity { i: *i, a: *a }),
            ("p", [a, i]) => Some(CoordRole::Momentum { a: *a, i: *i }),
            ("y", [al, a]) => Some(CoordRole::AlgVelocity { alpha: *al, a: *a }),
            ("w", [a, al]) => Some(CoordRole::AlgMomentum { a: *a, alpha: *al }),
            ("vt", [a, b]) => Some(CoordRole::LiftTime { a: *a, b: *b }),
            ("vq", [a, i]) => Some(CoordRole::LiftBase { a: *a, i: *i }),
            ("vp", [a, b, i]) => Some(CoordRole::LiftMomentum { a: *a, b: *b, i: *i }),
            _ => None,
        }
    }
}

fn split_prefix(name: &str) -> Option<(&str, &str)> {
    let cut = name.find(|c: char| c.is_ascii_digit())?;
    let (p, r) = name.split_at(cut);
    if p.is_empty() {
        return None;
    }
    Some((p, r))
}

impl fmt::Display for CoordRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Declared identifiers an expression may reference.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymbolTable {
    roles: BTreeMap<String, CoordRole>,
    order: Vec<String>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_roles(roles: impl IntoIterator<Item = CoordRole>) -> Self {
        let mut t = Self::new();
        for r in roles {
            t.declare(r);
        }
        t
    }

    pub fn declare(&mut self, role: CoordRole) {
        let name = role.name();
        if self.roles.insert(name.clone(), role).is_none() {
            self.order.push(name);
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.roles.contains_key(name)
    }

    pub fn role(&self, name: &str) -> Option<CoordRole> {
        self.roles.get(name).copied()
    }

    /// Names in declaration order.
    pub fn names(&self) -> &[String] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.order.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        let roles = [
            CoordRole::Time { a: 1 },
            CoordRole::Base { i: 11 },
            CoordRole::Velocity { i: 0, a: 2 },
            CoordRole::Momentum { a: 2, i: 0 },
            CoordRole::AlgVelocity { alpha: 2, a: 0 },
            CoordRole::AlgMomentum { a: 0, alpha: 2 },
            CoordRole::LiftTime { a: 0, b: 1 },
            CoordRole::LiftBase { a: 1, i: 0 },
            CoordRole::LiftMomentum { a: 1, b: 0, i: 3 },
        ];
        for r in roles {
            assert_eq!(CoordRole::parse(&r.name()), Some(r));
        }
        assert_eq!(CoordRole::Velocity { i: 1, a: 0 }.name(), "v2_1");
        assert_eq!(CoordRole::Momentum { a: 0, i: 1 }.name(), "p1_2");
    }

    #[test]
    fn rejects_malformed() {
        for s in ["t", "t0", "q1_2", "v1", "x1", "v01_1", "p1_", "sin"] {
            assert_eq!(CoordRole::parse(s), None, "{s}");
        }
    }
}
