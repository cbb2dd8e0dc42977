//! The fixed 15-entry static obstacle catalog.

use std::collections::HashSet;

use thiserror::Error;

use super::attributes::*;

/// Bounding box of an obstacle, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensions {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Dimensions {
    pub const fn new(length: f64, width: f64, height: f64) -> Self {
        Self { length, width, height }
    }

    /// Area presented to an oncoming vehicle (width × height), m².
    pub fn frontal_area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleClass {
    /// Canonical lowercase snake-case identifier, e.g. `plastic_chair`.
    pub id: String,
    /// Row label used in reports, e.g. `Plastic chair`.
    pub display_name: String,
    pub dimensions: Dimensions,
    pub valuation: PropertyValuation,
}

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("catalog must have exactly {expected} entries, got {actual}")]
    WrongSize { expected: usize, actual: usize },
    #[error("duplicate obstacle id `{0}`")]
    DuplicateId(String),
    #[error("obstacle `{0}` has a non-positive dimension")]
    BadDimensions(String),
    #[error("obstacle id `{0}` is not a lowercase snake-case token")]
    BadId(String),
}

/// Number of obstacle classes in the experiment.
pub const CATALOG_SIZE: usize = 15;

/// An ordered, validated obstacle catalog. Order is the report row order.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    entries: Vec<ObstacleClass>,
}

impl Catalog {
    pub fn new(entries: Vec<ObstacleClass>) -> Result<Self, CatalogError> {
        if entries.len() != CATALOG_SIZE {
            return Err(CatalogError::WrongSize { expected: CATALOG_SIZE, actual: entries.len() });
        }
        let mut seen = HashSet::new();
        for entry in &entries {
            let well_formed = !entry.id.is_empty()
                && entry.id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            if !well_formed {
                return Err(CatalogError::BadId(entry.id.clone()));
            }
            if !seen.insert(entry.id.as_str()) {
                return Err(CatalogError::DuplicateId(entry.id.clone()));
            }
            let d = entry.dimensions;
            // written so that NaN also fails
            if !(d.length > 0.0 && d.width > 0.0 && d.height > 0.0) {
                return Err(CatalogError::BadDimensions(entry.id.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, id: &str) -> Option<&ObstacleClass> {
        self.entries.iter().find(|o| o.id == id)
    }

    /// Mutable access for calibration experiments. Ids and dimensions must
    /// stay valid; the catalog is not re-validated.
    pub fn get_mut(&mut self, id: &str) -> Option<&mut ObstacleClass> {
        self.entries.iter_mut().find(|o| o.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ObstacleClass> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|o| o.id.as_str())
    }
}

impl<'a> IntoIterator for &'a Catalog {
    type Item = &'a ObstacleClass;
    type IntoIter = std::slice::Iter<'a, ObstacleClass>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

use DensityClass as D;
use ElasticityClass as E;
use MalleabilityClass as Ma;
use MassClass as M;
use PassUnderClass as P;
use UndersideRiskClass as U;

struct Row {
    id: &'static str,
    name: &'static str,
    dims: Dimensions,
    mass: M,
    malleability: Ma,
    pass_under: P,
    density: D,
    elasticity: E,
    underside_risk: U,
}

const fn row(
    id: &'static str,
    name: &'static str,
    dims: Dimensions,
    (mass, malleability, pass_under, density, elasticity, underside_risk): (M, Ma, P, D, E, U),
) -> Row {
    Row { id, name, dims, mass, malleability, pass_under, density, elasticity, underside_risk }
}

const fn dims(length: f64, width: f64, height: f64) -> Dimensions {
    Dimensions::new(length, width, height)
}

// Dimensions are co-calibrated with the baseline autopilot's 0.40 m² frontal
// area threshold: the cone through the trolley rows marked `>=` clear it.
#[rustfmt::skip]
const ROWS: [Row; CATALOG_SIZE] = [
    // >= 0.44 m²
    row("construction_cone", "Construction cone", dims(0.55, 0.55, 0.80), (M::Light, Ma::Low,  P::CanPass,    D::Low,  E::High, U::High)),
    // >= 0.48 m²
    row("box_01",            "Box 01",            dims(0.80, 0.80, 0.60), (M::Light, Ma::Low,  P::CannotPass, D::Low,  E::Low,  U::Low)),
    row("creased_box_02",    "Creased box 02",    dims(0.60, 0.60, 0.25), (M::Light, Ma::High, P::CanPass,    D::Low,  E::Low,  U::Low)),
    row("cola_can",          "Cola can",          dims(0.07, 0.07, 0.12), (M::Light, Ma::High, P::CanPass,    D::Low,  E::Low,  U::Low)),
    row("garbage_01",        "Garbage 01",        dims(0.40, 0.40, 0.30), (M::Light, Ma::High, P::CanPass,    D::Low,  E::Low,  U::Low)),
    row("garbage_05",        "Garbage 05",        dims(0.50, 0.45, 0.35), (M::Light, Ma::High, P::CanPass,    D::Low,  E::Low,  U::Low)),
    row("garbage_06",        "Garbage 06",        dims(0.35, 0.30, 0.25), (M::Light, Ma::High, P::CanPass,    D::Low,  E::Low,  U::Low)),
    row("trash_can_03",      "Trash can 03",      dims(0.50, 0.50, 0.75), (M::Light, Ma::Low,  P::CannotPass, D::Low,  E::Low,  U::Low)),
    // >= 0.51 m²
    row("plastic_chair",     "Plastic chair",     dims(0.55, 0.60, 0.85), (M::Light, Ma::High, P::CannotPass, D::Low,  E::Low,  U::High)),
    row("gnome",             "Gnome",             dims(0.25, 0.25, 0.40), (M::Light, Ma::Low,  P::CanPass,    D::Low,  E::Low,  U::Low)),
    row("watering_can",      "Watering can",      dims(0.50, 0.25, 0.40), (M::Light, Ma::Low,  P::CannotPass, D::Low,  E::Low,  U::Low)),
    // >= 0.44 m²
    row("plastic_bag",       "Plastic bag",       dims(0.50, 0.80, 0.55), (M::Light, Ma::High, P::CanPass,    D::Low,  E::Low,  U::Low)),
    // >= 0.42 m²
    row("shopping_bag",      "Shopping bag",      dims(0.30, 0.70, 0.60), (M::Light, Ma::Low,  P::CannotPass, D::Low,  E::Low,  U::Low)),
    // >= 0.60 m²
    row("shopping_cart",     "Shopping cart",     dims(1.00, 0.60, 1.00), (M::Light, Ma::Low,  P::CannotPass, D::High, E::High, U::High)),
    // >= 0.52 m²
    row("shopping_trolley",  "Shopping trolley",  dims(0.90, 0.55, 0.95), (M::Light, Ma::Low,  P::CannotPass, D::Low,  E::Low,  U::Low)),
];

/// The shipped 15-entry catalog, in report row order.
pub fn catalog() -> Catalog {
    let entries = ROWS
        .iter()
        .map(|r| ObstacleClass {
            id: r.id.to_string(),
            display_name: r.name.to_string(),
            dimensions: r.dims,
            valuation: PropertyValuation {
                mass: r.mass,
                malleability: r.malleability,
                pass_under: r.pass_under,
                density: r.density,
                elasticity: r.elasticity,
                underside_risk: r.underside_risk,
            },
        })
        .collect();
    Catalog::new(entries).expect("shipped catalog is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_fifteen_unique_entries() {
        let cat = catalog();
        assert_eq!(cat.len(), 15);
        let ids: HashSet<_> = cat.ids().collect();
        assert_eq!(ids.len(), 15);
    }

    #[test]
    fn plastic_chair_matches_worked_example() {
        let cat = catalog();
        let v = cat.get("plastic_chair").unwrap().valuation;
        assert_eq!(v.mass, MassClass::Light);
        assert_eq!(v.malleability, MalleabilityClass::High);
        assert_eq!(v.pass_under, PassUnderClass::CannotPass);
        assert_eq!(v.density, DensityClass::Low);
        assert_eq!(v.elasticity, ElasticityClass::Low);
        assert_eq!(v.underside_risk, UndersideRiskClass::High);
    }

    #[test]
    fn cone_carries_tire_risk_and_cart_is_elastic() {
        let cat = catalog();
        assert_eq!(cat.get("construction_cone").unwrap().valuation.underside_risk, UndersideRiskClass::High);
        let cart = cat.get("shopping_cart").unwrap().valuation;
        assert_eq!(cart.elasticity, ElasticityClass::High);
        assert_eq!(cart.pass_under, PassUnderClass::CannotPass);
    }

    #[test]
    fn catalog_is_deterministic() {
        assert_eq!(catalog(), catalog());
    }

    #[test]
    fn rejects_bad_catalogs() {
        let mut entries: Vec<_> = catalog().iter().cloned().collect();
        entries[1].id = entries[0].id.clone();
        assert_eq!(Catalog::new(entries).unwrap_err(), CatalogError::DuplicateId("construction_cone".into()));

        let mut entries: Vec<_> = catalog().iter().cloned().collect();
        entries[3].dimensions.height = 0.0;
        assert!(matches!(
            Catalog::new(entries),
            Err(CatalogError::BadDimensions(id)) if id == "cola_can"
        ));

        let mut entries: Vec<_> = catalog().iter().cloned().collect();
        entries.pop();
        assert!(matches!(Catalog::new(entries), Err(CatalogError::WrongSize { actual: 14, .. })));

        let mut entries: Vec<_> = catalog().iter().cloned().collect();
        entries[0].id = "Cone X".into();
        assert!(matches!(Catalog::new(entries), Err(CatalogError::BadId(_))));
    }
}
