//! Two-valued categorical attribute levels.
//!
//! Every attribute family has exactly two levels and no "unknown" level, so a
//! [`PropertyValuation`] is always total.

use std::fmt;

/// A two-level categorical attribute family.
pub trait Attribute: Copy + Eq + fmt::Debug + 'static {
    /// Family token used in node ids, e.g. `mass` in `prop:mass:light`.
    const FAMILY: &'static str;
    /// Both levels, in a fixed order.
    const LEVELS: [Self; 2];

    /// Level token used in node ids.
    fn token(self) -> &'static str;

    fn from_token(token: &str) -> Option<Self> {
        Self::LEVELS.into_iter().find(|l| l.token() == token)
    }
}

macro_rules! attribute {
    (
        $(#[$meta:meta])*
        $name:ident, $family:literal { $a:ident => $ta:literal, $b:ident => $tb:literal }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $a,
            $b,
        }

        impl Attribute for $name {
            const FAMILY: &'static str = $family;
            const LEVELS: [Self; 2] = [$name::$a, $name::$b];

            fn token(self) -> &'static str {
                match self {
                    $name::$a => $ta,
                    $name::$b => $tb,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }
    };
}

attribute!(
    /// Expected mass.
    MassClass, "mass" { Light => "light", Heavy => "heavy" }
);
attribute!(
    /// Tendency to deform on impact.
    MalleabilityClass, "malleability" { High => "high", Low => "low" }
);
attribute!(
    /// Whether the obstacle's size lets the car clear it.
    PassUnderClass, "pass_under" { CanPass => "can_pass", CannotPass => "cannot_pass" }
);
attribute!(
    /// Expected density.
    DensityClass, "density" { High => "high", Low => "low" }
);
attribute!(
    /// Tendency to rebound or keep shape on impact.
    ElasticityClass, "elasticity" { High => "high", Low => "low" }
);
attribute!(
    /// Risk of strong damage to the car's underside or tires.
    UndersideRiskClass, "underside_risk" { High => "high", Low => "low" }
);
attribute!(
    /// Expected impulse after a collision. Derived, never stored.
    ImpulseClass, "impulse" { High => "high", Low => "low" }
);

/// The six stored material attributes of an obstacle class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PropertyValuation {
    pub mass: MassClass,
    pub malleability: MalleabilityClass,
    pub pass_under: PassUnderClass,
    pub density: DensityClass,
    pub elasticity: ElasticityClass,
    pub underside_risk: UndersideRiskClass,
}

impl PropertyValuation {
    /// `(family, level)` token pairs for the six attributes, in declaration order.
    pub fn levels(&self) -> [(&'static str, &'static str); 6] {
        [
            (MassClass::FAMILY, self.mass.token()),
            (MalleabilityClass::FAMILY, self.malleability.token()),
            (PassUnderClass::FAMILY, self.pass_under.token()),
            (DensityClass::FAMILY, self.density.token()),
            (ElasticityClass::FAMILY, self.elasticity.token()),
            (UndersideRiskClass::FAMILY, self.underside_risk.token()),
        ]
    }
}
