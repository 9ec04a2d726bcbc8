//! Geographic instrument: mean distance to a roster of 30 leading IT
//! universities, scaled by local listed-firm density.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean Earth radius in km (IUGG).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;
pub const ROSTER_SIZE: usize = 30;
pub const DEFAULT_RHO: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversitySite {
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmLocation {
    pub firm_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub city_id: String,
}

pub fn check_coordinates(lat: f64, lon: f64) -> Result<()> {
    if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
        return Err(Error::invalid(alloc::format!(
            "invalid coordinates ({lat}, {lon})"
        )));
    }
    Ok(())
}

/// Great-circle distance in units of 1000 km.
pub fn haversine_mm(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64> {
    check_coordinates(lat1, lon1)?;
    check_coordinates(lat2, lon2)?;
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = libm::pow(libm::sin(dp / 2.0), 2.0)
        + libm::cos(p1) * libm::cos(p2) * libm::pow(libm::sin(dl / 2.0), 2.0);
    let c = 2.0 * libm::asin(libm::sqrt(h.clamp(0.0, 1.0)));
    Ok(EARTH_RADIUS_KM * c / 1000.0)
}

pub fn firm_to_site(firm: &FirmLocation, site: &UniversitySite) -> Result<f64> {
    haversine_mm(firm.latitude, firm.longitude, site.latitude, site.longitude)
}

/// Validated list of exactly 30 university sites.
#[derive(Debug, Clone, PartialEq)]
pub struct Roster(Vec<UniversitySite>);

impl Roster {
    pub fn new(sites: Vec<UniversitySite>) -> Result<Self> {
        if sites.len() != ROSTER_SIZE {
            return Err(Error::invalid(alloc::format!(
                "roster must list exactly {ROSTER_SIZE} sites, got {}",
                sites.len()
            )));
        }
        for s in &sites {
            check_coordinates(s.latitude, s.longitude)?;
        }
        Ok(Roster(sites))
    }

    pub fn sites(&self) -> &[UniversitySite] {
        &self.0
    }
}

/// Mean firm-to-site distance over the roster, in 1000 km.
pub fn mean_distance(firm: &FirmLocation, roster: &Roster) -> Result<f64> {
    let mut total = 0.0;
    for site in roster.sites() {
        total += firm_to_site(firm, site)?;
    }
    Ok(total / ROSTER_SIZE as f64)
}

/// Number of distinct listed firms per (city, year).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CityCounts(BTreeMap<(String, i32), usize>);

impl CityCounts {
    /// Counts firms present in `firm_years` by the city of their location.
    /// Firms without a known location are skipped.
    pub fn build(locations: &[FirmLocation], firm_years: &[(String, i32)]) -> Self {
        let city: BTreeMap<&str, &str> = locations
            .iter()
            .map(|l| (l.firm_id.as_str(), l.city_id.as_str()))
            .collect();
        let mut firms: BTreeMap<(String, i32), BTreeSet<&str>> = BTreeMap::new();
        for (firm, year) in firm_years {
            if let Some(c) = city.get(firm.as_str()) {
                firms
                    .entry((String::from(*c), *year))
                    .or_default()
                    .insert(firm.as_str());
            }
        }
        CityCounts(firms.into_iter().map(|(k, v)| (k, v.len())).collect())
    }

    pub fn get(&self, city: &str, year: i32) -> Option<usize> {
        self.0.get(&(String::from(city), year)).copied()
    }
}

/// Instrument value: mean distance × (listed firms in the firm's city that
/// year, the firm itself included) / ρ.
pub fn build_iv(
    firm: &FirmLocation,
    year: i32,
    counts: &CityCounts,
    roster: &Roster,
    rho: f64,
) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::invalid(alloc::format!("rho must be positive, got {rho}")));
    }
    if firm.city_id.trim().is_empty() {
        return Err(Error::invalid(alloc::format!("firm {} has no city", firm.firm_id)));
    }
    let count = counts.get(&firm.city_id, year).ok_or_else(|| {
        Error::invalid(alloc::format!(
            "city {} has no listed firms in {year}",
            firm.city_id
        ))
    })?;
    Ok(iv_value(mean_distance(firm, roster)?, count, rho))
}

pub fn iv_value(mean_distance: f64, count: usize, rho: f64) -> f64 {
    mean_distance * count as f64 / rho
}

/// Instrument for every (firm, year) in `firm_years`, in input order.
pub fn build_iv_column(
    locations: &[FirmLocation],
    firm_years: &[(String, i32)],
    roster: &Roster,
    rho: f64,
) -> Result<Vec<f64>> {
    let counts = CityCounts::build(locations, firm_years);
    let by_firm: BTreeMap<&str, &FirmLocation> =
        locations.iter().map(|l| (l.firm_id.as_str(), l)).collect();
    let mut cache: BTreeMap<&str, f64> = BTreeMap::new();
    firm_years
        .iter()
        .map(|(firm, year)| {
            let loc = by_firm
                .get(firm.as_str())
                .ok_or_else(|| Error::invalid(alloc::format!("no location for firm {firm}")))?;
            if !(rho > 0.0) {
                return Err(Error::invalid(alloc::format!("rho must be positive, got {rho}")));
            }
            let d = match cache.get(firm.as_str()) {
                Some(&d) => d,
                None => {
                    let d = mean_distance(loc, roster)?;
                    cache.insert(firm.as_str(), d);
                    d
                }
            };
            let count = counts.get(&loc.city_id, *year).ok_or_else(|| {
                Error::invalid(alloc::format!("city {} absent in {year}", loc.city_id))
            })?;
            Ok(iv_value(d, count, rho))
        })
        .collect()
}
