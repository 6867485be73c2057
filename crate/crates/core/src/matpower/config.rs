//! Converter configuration: a small XML file with options, variables and
//! limits sections. Unspecified fields take defaults.
//!
//! ```xml
//! <config>
//!   <options>
//!     <format>polar</format>        <!-- polar | rectangular | complex -->
//!     <symbols>greek</symbols>      <!-- greek | ascii -->
//!   </options>
//!   <variables>
//!     <zip>
//!       <active z="0" i="0" p="1"/>
//!       <reactive z="0" i="0" p="1"/>
//!     </zip>
//!   </variables>
//!   <limits>
//!     <enforceQLimits>false</enforceQLimits>
//!   </limits>
//! </config>
//! ```

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Polar,
    Rectangular,
    Complex,
}

impl Format {
    pub fn from_str(s: &str) -> Option<Format> {
        Some(match s {
            "polar" => Format::Polar,
            "rectangular" => Format::Rectangular,
            "complex" => Format::Complex,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Polar => "polar",
            Format::Rectangular => "rectangular",
            Format::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symbols {
    Greek,
    Ascii,
}

impl Symbols {
    pub fn from_str(s: &str) -> Option<Symbols> {
        Some(match s {
            "greek" => Symbols::Greek,
            "ascii" => Symbols::Ascii,
            _ => return None,
        })
    }
}

/// Constant-impedance / constant-current / constant-power fractions.
/// They must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zip {
    pub z: f64,
    pub i: f64,
    pub p: f64,
}

impl Default for Zip {
    fn default() -> Self {
        Zip {
            z: 0.0,
            i: 0.0,
            p: 1.0,
        }
    }
}

impl Zip {
    pub fn is_constant_power(&self) -> bool {
        self.z == 0.0 && self.i == 0.0
    }

    fn check(&self, what: &str) -> Result<(), Error> {
        if (self.z + self.i + self.p - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "{what} ZIP fractions must sum to 1 (z={} i={} p={})",
                self.z, self.i, self.p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvertOptions {
    pub format: Format,
    pub symbols: Symbols,
    pub enforce_q_limits: bool,
    pub zip_p: Zip,
    pub zip_q: Zip,
}

impl Default for ConvertOptions {
    fn default() -> Self {
        ConvertOptions {
            format: Format::Polar,
            symbols: Symbols::Greek,
            enforce_q_limits: false,
            zip_p: Zip::default(),
            zip_q: Zip::default(),
        }
    }
}

/// Parse a config file. Unknown elements are ignored; malformed markup and
/// inconsistent ZIP fractions are errors.
pub fn load_config(text: &str) -> Result<ConvertOptions, Error> {
    let mut options = ConvertOptions::default();
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut path: Vec<String> = Vec::new();
    loop {
        match reader
            .read_event()
            .map_err(|e| Error::Config(format!("malformed config: {e}")))?
        {
            Event::Start(start) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).to_string();
                path.push(name.clone());
                if name == "active" || name == "reactive" {
                    let zip = if name == "active" {
                        &mut options.zip_p
                    } else {
                        &mut options.zip_q
                    };
                    read_zip_attrs(&start, zip)?;
                }
            }
            Event::Empty(start) => {
                let name = String::from_utf8_lossy(start.name().as_ref()).to_string();
                if name == "active" || name == "reactive" {
                    let zip = if name == "active" {
                        &mut options.zip_p
                    } else {
                        &mut options.zip_q
                    };
                    read_zip_attrs(&start, zip)?;
                }
            }
            Event::Text(text) => {
                let value = text
                    .decode()
                    .map_err(|e| Error::Config(format!("malformed config: {e}")))?
                    .trim()
                    .to_string();
                match path.last().map(String::as_str) {
                    Some("format") => {
                        options.format = Format::from_str(&value)
                            .ok_or_else(|| Error::Config(format!("unknown format `{value}`")))?;
                    }
                    Some("symbols") => {
                        options.symbols = Symbols::from_str(&value)
                            .ok_or_else(|| Error::Config(format!("unknown symbols `{value}`")))?;
                    }
                    Some("enforceQLimits") => {
                        options.enforce_q_limits = match value.as_str() {
                            "true" => true,
                            "false" => false,
                            other => {
                                return Err(Error::Config(format!(
                                    "enforceQLimits must be true or false, got `{other}`"
                                )))
                            }
                        };
                    }
                    _ => {}
                }
            }
            Event::End(_) => {
                path.pop();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    options.zip_p.check("active")?;
    options.zip_q.check("reactive")?;
    Ok(options)
}

fn read_zip_attrs(start: &quick_xml::events::BytesStart<'_>, zip: &mut Zip) -> Result<(), Error> {
    for attr in start.attributes() {
        let attr = attr.map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).to_string();
        let value = String::from_utf8_lossy(&attr.value).to_string();
        let v: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("bad ZIP fraction `{value}`")))?;
        match key.as_str() {
            "z" => zip.z = v,
            "i" => zip.i = v,
            "p" => zip.p = v,
            _ => {}
        }
    }
    Ok(())
}
