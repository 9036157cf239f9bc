//! Station CSV formats and half-hourly to daily aggregation.
//!
//! Half-hourly files carry `timestamp_iso8601,temp_c,precip_mm[,theta_vwc]`;
//! daily files carry
//! `date,day_index,tmax_c,tavg_c,tmin_c,precip_mm[,theta_vwc]`. Both are
//! comma-separated with a mandatory header row. An empty `theta_vwc` cell
//! means no moisture reading.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use log::warn;

use crate::error::{Error, Result};
use crate::evapo::DailyWeather;

pub const HALF_HOURLY_HEADER: [&str; 4] = ["timestamp_iso8601", "temp_c", "precip_mm", "theta_vwc"];
pub const DAILY_HEADER: [&str; 7] = [
    "date",
    "day_index",
    "tmax_c",
    "tavg_c",
    "tmin_c",
    "precip_mm",
    "theta_vwc",
];

/// Intervals in a complete day.
pub const INTERVALS_PER_DAY: usize = 48;
pub const DEFAULT_MIN_COVERAGE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfHourRecord {
    pub timestamp: NaiveDateTime,
    /// °C
    pub temp: f64,
    /// mm in the interval
    pub precip: f64,
    /// m³/m³
    pub theta: Option<f64>,
}

/// A day of weather plus the mean moisture reading, when there is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyObservation {
    pub weather: DailyWeather,
    pub theta: Option<f64>,
}

/// A calendar day dropped for insufficient coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gap {
    pub date: NaiveDate,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub days: Vec<DailyObservation>,
    pub gaps: Vec<Gap>,
}

/// Groups sorted half-hourly records into calendar days.
///
/// Days with fewer than `min_coverage` of 48 records are excluded and listed
/// in [`Aggregated::gaps`], as are calendar days with no records at all
/// between the first and last record. `day_index` counts days from the first
/// record's date.
pub fn daily_aggregate(records: &[HalfHourRecord], min_coverage: usize) -> Result<Aggregated> {
    for (row, pair) in records.windows(2).enumerate() {
        if pair[1].timestamp <= pair[0].timestamp {
            return Err(Error::Ordering {
                row: row + 1,
                detail: format!(
                    "{} does not follow {}",
                    pair[1].timestamp, pair[0].timestamp
                ),
            });
        }
    }
    let mut out = Aggregated {
        days: Vec::new(),
        gaps: Vec::new(),
    };
    let Some(first) = records.first() else {
        return Ok(out);
    };
    let origin = first.timestamp.date();

    let mut start = 0;
    let mut expected = origin;
    while start < records.len() {
        let date = records[start].timestamp.date();
        while expected < date {
            out.gaps.push(Gap {
                date: expected,
                records: 0,
            });
            expected = expected.succ_opt().expect("date in range");
        }
        let len = records[start..]
            .iter()
            .take_while(|r| r.timestamp.date() == date)
            .count();
        let day = &records[start..start + len];
        start += len;
        expected = date.succ_opt().expect("date in range");

        if len < min_coverage {
            out.gaps.push(Gap { date, records: len });
            continue;
        }
        let tmax = day.iter().map(|r| r.temp).fold(f64::NEG_INFINITY, f64::max);
        let tmin = day.iter().map(|r| r.temp).fold(f64::INFINITY, f64::min);
        let tavg = (day.iter().map(|r| r.temp).sum::<f64>() / len as f64).clamp(tmin, tmax);
        let precip = day.iter().map(|r| r.precip).sum();
        let thetas: Vec<f64> = day.iter().filter_map(|r| r.theta).collect();
        let theta = (!thetas.is_empty()).then(|| thetas.iter().sum::<f64>() / thetas.len() as f64);
        let day_index = (date - origin).num_days() as u32;
        out.days.push(DailyObservation {
            weather: DailyWeather::new(day_index, date, tmax, tavg, tmin, precip)?,
            theta,
        });
    }
    for gap in &out.gaps {
        warn!(
            "excluding {}: {} of {} half-hour records",
            gap.date, gap.records, INTERVALS_PER_DAY
        );
    }
    Ok(out)
}

fn parse_f64(raw: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|e| Error::Parse {
        line,
        field: field.to_string(),
        message: format!("`{raw}`: {e}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            field: field.to_string(),
            message: format!("non-finite value `{raw}`"),
        });
    }
    Ok(v)
}

fn parse_optional(raw: Option<&str>, line: usize, field: &str) -> Result<Option<f64>> {
    match raw.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => parse_f64(s, line, field).map(Some),
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str], optional_last: bool) -> Result<()> {
    let required = if optional_last {
        expected.len() - 1
    } else {
        expected.len()
    };
    let ok = found.len() >= required
        && found.len() <= expected.len()
        && found.iter().zip(expected).all(|(f, e)| f.trim() == *e);
    if !ok {
        return Err(Error::Parse {
            line: 1,
            field: "header".to_string(),
            message: format!(
                "expected `{}`, found `{}`",
                expected.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, line: usize, name: &str) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| Error::Parse {
        line,
        field: name.to_string(),
        message: "missing field".to_string(),
    })
}

fn parse_timestamp(raw: &str, line: usize) -> Result<NaiveDateTime> {
    let raw = raw.trim();
    let ts = NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M"))
        .or_else(|_| NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H:%M:%S"))
        .map_err(|e| Error::Parse {
            line,
            field: HALF_HOURLY_HEADER[0].to_string(),
            message: format!("`{raw}`: {e}"),
        })?;
    if ts.minute() % 30 != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
        return Err(Error::Parse {
            line,
            field: HALF_HOURLY_HEADER[0].to_string(),
            message: format!("`{raw}` is not on the 30-minute grid"),
        });
    }
    Ok(ts)
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

pub fn read_half_hourly<R: Read>(reader: R) -> Result<Vec<HalfHourRecord>> {
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers()?, &HALF_HOURLY_HEADER, true)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let timestamp = parse_timestamp(field(&rec, 0, line, HALF_HOURLY_HEADER[0])?, line)?;
        let temp = parse_f64(field(&rec, 1, line, "temp_c")?, line, "temp_c")?;
        let precip = parse_f64(field(&rec, 2, line, "precip_mm")?, line, "precip_mm")?;
        if precip < 0.0 {
            return Err(Error::Parse {
                line,
                field: "precip_mm".to_string(),
                message: format!("negative precipitation {precip}"),
            });
        }
        let theta = parse_optional(rec.get(3), line, "theta_vwc")?;
        out.push(HalfHourRecord {
            timestamp,
            temp,
            precip,
            theta,
        });
    }
    Ok(out)
}

pub fn write_half_hourly<W: Write>(writer: W, records: &[HalfHourRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HALF_HOURLY_HEADER)?;
    for r in records {
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.temp.to_string(),
            r.precip.to_string(),
            r.theta.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_daily<R: Read>(reader: R) -> Result<Vec<DailyObservation>> {
    let mut rdr = csv_reader(reader);
    check_header(rdr.headers()?, &DAILY_HEADER, true)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let raw_date = field(&rec, 0, line, "date")?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| Error::Parse {
            line,
            field: "date".to_string(),
            message: format!("`{raw_date}`: {e}"),
        })?;
        let raw_idx = field(&rec, 1, line, "day_index")?;
        let day_index: u32 = raw_idx.parse().map_err(|e| Error::Parse {
            line,
            field: "day_index".to_string(),
            message: format!("`{raw_idx}`: {e}"),
        })?;
        let mut vals = [0.0; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            let name = DAILY_HEADER[k + 2];
            *v = parse_f64(field(&rec, k + 2, line, name)?, line, name)?;
        }
        let [tmax, tavg, tmin, precip] = vals;
        let weather =
            DailyWeather::new(day_index, date, tmax, tavg, tmin, precip).map_err(|e| {
                Error::Parse {
                    line,
                    field: "weather".to_string(),
                    message: e.to_string(),
                }
            })?;
        let theta = parse_optional(rec.get(6), line, "theta_vwc")?;
        out.push(DailyObservation { weather, theta });
    }
    for (row, pair) in out.windows(2).enumerate() {
        if pair[1].weather.date <= pair[0].weather.date {
            return Err(Error::Ordering {
                row: row + 2,
                detail: format!(
                    "{} does not follow {}",
                    pair[1].weather.date, pair[0].weather.date
                ),
            });
        }
    }
    Ok(out)
}

pub fn write_daily<W: Write>(writer: W, days: &[DailyObservation]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DAILY_HEADER)?;
    for d in days {
        let wx = &d.weather;
        w.write_record([
            wx.date.format("%Y-%m-%d").to_string(),
            wx.day_index.to_string(),
            wx.tmax.to_string(),
            wx.tavg.to_string(),
            wx.tmin.to_string(),
            wx.precip.to_string(),
            d.theta.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_half_hourly_file(path: &Path) -> Result<Vec<HalfHourRecord>> {
    read_half_hourly(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_daily_file(path: &Path) -> Result<Vec<DailyObservation>> {
    read_daily(File::open(path).map_err(|e| Error::io(path, e))?)
}

pub fn write_daily_file(path: &Path, days: &[DailyObservation]) -> Result<()> {
    write_daily(File::create(path).map_err(|e| Error::io(path, e))?, days)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn day_records(date: NaiveDate, n: usize, temp: impl Fn(usize) -> f64) -> Vec<HalfHourRecord> {
        (0..n)
            .map(|i| HalfHourRecord {
                timestamp: date
                    .and_hms_opt((i / 2) as u32, (i % 2) as u32 * 30, 0)
                    .unwrap(),
                temp: temp(i),
                precip: 0.5,
                theta: None,
            })
            .collect()
    }

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, m, day).unwrap()
    }

    #[test]
    fn constant_day() {
        let recs = day_records(d(10, 14), 48, |_| 20.0);
        let agg = daily_aggregate(&recs, 40).unwrap();
        assert_eq!(agg.days.len(), 1);
        let w = agg.days[0].weather;
        assert_eq!((w.tmax, w.tavg, w.tmin), (20.0, 20.0, 20.0));
        assert_abs_diff_eq!(w.precip, 24.0, epsilon = 1e-12);
        assert!(agg.gaps.is_empty());
    }

    #[test]
    fn sparse_day_is_reported() {
        let mut recs = day_records(d(10, 14), 48, |i| i as f64);
        recs.extend(day_records(d(10, 15), 39, |_| 25.0));
        recs.extend(day_records(d(10, 17), 40, |_| 25.0));
        let agg = daily_aggregate(&recs, 40).unwrap();
        assert_eq!(agg.days.len(), 2);
        assert_eq!(agg.days[1].weather.day_index, 3);
        assert_eq!(
            agg.gaps,
            vec![
                Gap {
                    date: d(10, 15),
                    records: 39
                },
                Gap {
                    date: d(10, 16),
                    records: 0
                }
            ]
        );
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let mut recs = day_records(d(10, 14), 48, |_| 20.0);
        recs.swap(3, 4);
        assert!(matches!(
            daily_aggregate(&recs, 40),
            Err(Error::Ordering { row: 4, .. })
        ));
        let mut dup = day_records(d(10, 14), 4, |_| 20.0);
        dup[2] = dup[1];
        assert!(daily_aggregate(&dup, 1).is_err());
    }

    #[test]
    fn theta_mean_uses_present_values() {
        let mut recs = day_records(d(10, 14), 48, |_| 20.0);
        recs[0].theta = Some(0.4);
        recs[1].theta = Some(0.5);
        let agg = daily_aggregate(&recs, 40).unwrap();
        assert_abs_diff_eq!(agg.days[0].theta.unwrap(), 0.45, epsilon = 1e-15);
    }

    #[test]
    fn half_hourly_parse_errors_carry_context() {
        let text = "timestamp_iso8601,temp_c,precip_mm\n2010-10-14T00:00:00,21.5,0\n2010-10-14T00:30:00,abc,0\n";
        match read_half_hourly(text.as_bytes()) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "temp_c");
            }
            other => panic!("unexpected {other:?}"),
        }
        let off_grid = "timestamp_iso8601,temp_c,precip_mm\n2010-10-14T00:10:00,21.5,0\n";
        assert!(read_half_hourly(off_grid.as_bytes()).is_err());
        let bad_header = "time,temp,precip\n";
        assert!(read_half_hourly(bad_header.as_bytes()).is_err());
    }

    #[test]
    fn daily_round_trip() {
        let days = vec![
            DailyObservation {
                weather: DailyWeather::new(0, d(10, 14), 30.1, 24.2, 20.3, 1.5).unwrap(),
                theta: Some(0.41),
            },
            DailyObservation {
                weather: DailyWeather::new(1, d(10, 15), 29.0, 23.0, 19.0, 0.0).unwrap(),
                theta: None,
            },
        ];
        let mut buf = Vec::new();
        write_daily(&mut buf, &days).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("date,day_index,tmax_c,tavg_c,tmin_c,precip_mm,theta_vwc\n"));
        assert_eq!(read_daily(buf.as_slice()).unwrap(), days);
    }

    #[test]
    fn daily_without_theta_column() {
        let text = "date,day_index,tmax_c,tavg_c,tmin_c,precip_mm\n2011-08-20,0,31,25,21,0.2\n";
        let days = read_daily(text.as_bytes()).unwrap();
        assert_eq!(days[0].theta, None);
        assert_eq!(days[0].weather.tmax, 31.0);
    }
}
