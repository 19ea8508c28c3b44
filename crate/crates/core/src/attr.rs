//! Speaker attributes, their label vocabularies and per-attribute roles.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the three labelled speaker attributes, each with its own head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Dialect,
    Gender,
    Age,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Dialect, Attribute::Gender, Attribute::Age];

    pub fn num_classes(self) -> usize {
        match self {
            Attribute::Dialect => Dialect::ALL.len(),
            Attribute::Gender => Gender::ALL.len(),
            Attribute::Age => AgeBucket::ALL.len(),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Dialect => "dialect",
            Attribute::Gender => "gender",
            Attribute::Age => "age",
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Attribute::Dialect => Dialect::ALL.iter().map(|d| d.name()).collect(),
            Attribute::Gender => Gender::ALL.iter().map(|g| g.name()).collect(),
            Attribute::Age => AgeBucket::ALL.iter().map(|a| a.name()).collect(),
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dialect" => Ok(Attribute::Dialect),
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            other => Err(Error::Config(format!("unknown attribute '{other}'"))),
        }
    }
}

/// Tri-state role of an attribute in a training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Primary,
    Adversarial,
    Off,
}

impl Role {
    /// Results-table marker: ↑ primary, ↓ adversarial, ✗ off.
    pub fn marker(self) -> &'static str {
        match self {
            Role::Primary => "\u{2191}",
            Role::Adversarial => "\u{2193}",
            Role::Off => "\u{2717}",
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primary" | "up" | "\u{2191}" => Ok(Role::Primary),
            "adversarial" | "adv" | "down" | "\u{2193}" => Ok(Role::Adversarial),
            "off" | "none" | "\u{2717}" => Ok(Role::Off),
            other => Err(Error::Config(format!("unknown role '{other}'"))),
        }
    }
}

/// Fixed-size map keyed by [`Attribute`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PerAttribute<T>(pub [T; 3]);

impl<T> PerAttribute<T> {
    pub fn from_fn(mut f: impl FnMut(Attribute) -> T) -> Self {
        PerAttribute(Attribute::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Attribute, &T)> {
        Attribute::ALL.into_iter().zip(self.0.iter())
    }
}

impl<T> Index<Attribute> for PerAttribute<T> {
    type Output = T;

    fn index(&self, a: Attribute) -> &T {
        &self.0[a.index()]
    }
}

impl<T> IndexMut<Attribute> for PerAttribute<T> {
    fn index_mut(&mut self, a: Attribute) -> &mut T {
        &mut self.0[a.index()]
    }
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&v| v == self).expect("variant listed in ALL")
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name() == s)
                    .ok_or_else(|| Error::Data(format!(
                        concat!("unknown ", stringify!($name), " label '{}'"), s
                    )))
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

label_enum!(
    Dialect {
        Moldavian => "moldavian",
        StandardRomanian => "standard_romanian",
    }
);

label_enum!(
    Gender {
        Male => "male",
        Female => "female",
    }
);

label_enum!(
    /// Age buckets; `Other` covers speakers under 30 or over 70.
    AgeBucket {
        From30To40 => "30-40",
        From40To50 => "40-50",
        From50To60 => "50-60",
        From60To70 => "60-70",
        Other => "other",
    }
);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts() {
        assert_eq!(Attribute::Dialect.num_classes(), 2);
        assert_eq!(Attribute::Gender.num_classes(), 2);
        assert_eq!(Attribute::Age.num_classes(), 5);
    }

    #[test]
    fn labels_round_trip_through_text() {
        for &a in AgeBucket::ALL {
            assert_eq!(a.name().parse::<AgeBucket>().unwrap(), a);
            assert_eq!(AgeBucket::from_index(a.index()), Some(a));
        }
        assert!("teen".parse::<AgeBucket>().is_err());
        let json = serde_json::to_string(&Dialect::StandardRomanian).unwrap();
        assert_eq!(json, "\"standard_romanian\"");
    }

    #[test]
    fn role_markers() {
        assert_eq!(Role::Primary.marker(), "↑");
        assert_eq!(Role::Adversarial.marker(), "↓");
        assert_eq!(Role::Off.marker(), "✗");
        assert_eq!("↓".parse::<Role>().unwrap(), Role::Adversarial);
    }
}
