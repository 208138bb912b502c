//! Named formulas and accuracy tables shipped with the crate.

use std::fmt;
use std::str::FromStr;

use crate::parser::parse_named;
use crate::spec::ArchitectureSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    ResNet,
    Chain,
    NewArch,
    Eq22,
    AppendixEx1,
    AppendixEx2,
}

impl Builtin {
    pub const ALL: [Builtin; 6] = [
        Builtin::ResNet,
        Builtin::Chain,
        Builtin::NewArch,
        Builtin::Eq22,
        Builtin::AppendixEx1,
        Builtin::AppendixEx2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::ResNet => "resnet",
            Builtin::Chain => "chain",
            Builtin::NewArch => "newarch",
            Builtin::Eq22 => "eq22",
            Builtin::AppendixEx1 => "appendix-ex1",
            Builtin::AppendixEx2 => "appendix-ex2",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            Builtin::ResNet => include_str!("../fixtures/resnet.rf"),
            Builtin::Chain => include_str!("../fixtures/chain.rf"),
            Builtin::NewArch => include_str!("../fixtures/newarch.rf"),
            Builtin::Eq22 => include_str!("../fixtures/eq22.rf"),
            Builtin::AppendixEx1 => include_str!("../fixtures/appendix_ex1.rf"),
            Builtin::AppendixEx2 => include_str!("../fixtures/appendix_ex2.rf"),
        }
    }

    pub fn spec(self) -> ArchitectureSpec {
        parse_named(self.name(), self.source()).expect("shipped formula parses")
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Builtin::ALL.iter().map(|b| b.name()).collect();
                format!(
                    "unknown builtin `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

pub const TABLE1_CSV: &str = include_str!("../fixtures/table1.csv");
pub const TABLE2_CSV: &str = include_str!("../fixtures/table2.csv");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_and_round_trips() {
        for b in Builtin::ALL {
            let s = b.spec();
            assert_eq!(s.name, b.name());
            let again = parse_named(b.name(), &s.render()).unwrap();
            assert_eq!(again, s, "{b}");
            assert_eq!(b.name().parse::<Builtin>().unwrap(), b);
        }
        assert!("highway".parse::<Builtin>().is_err());
    }
}
