//! Readers and writers for the on-disk formats. Column layouts are listed in
//! `docs/data-formats.md`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::familiarity::{WorkerLandmarkMatrix, WorkerProfile};
use crate::geo::GeoPoint;
use crate::landmark::{Landmark, LandmarkId};
use crate::route::{CandidateSet, LandmarkRoute, RawRoute};
use crate::significance::{SignificanceScores, VisitEvent};

fn parse_error(record: Option<&csv::Position>, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line: record.map_or(0, |p| p.line() as usize), message: message.into() }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<(T, Option<csv::Position>)>, FormatError> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let pos = rec.position().cloned();
        let row: T = rec.deserialize(Some(&headers)).map_err(|e| parse_error(pos.as_ref(), e.to_string()))?;
        out.push((row, pos));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct LandmarkRow {
    id: String,
    #[serde(default)]
    name: String,
    lat: f64,
    lon: f64,
    #[serde(default)]
    significance: Option<f64>,
}

/// Landmarks with their raw significance (0 when the column is absent).
pub fn read_landmarks<R: Read>(r: R) -> Result<Vec<Landmark>, FormatError> {
    read_rows::<_, LandmarkRow>(r)?
        .into_iter()
        .map(|(row, pos)| {
            let location = GeoPoint::new(row.lat, row.lon).map_err(|e| parse_error(pos.as_ref(), e.to_string()))?;
            let name = if row.name.is_empty() { row.id.clone() } else { row.name };
            Ok(Landmark { id: LandmarkId(row.id), name, location, significance: row.significance.unwrap_or(0.0) })
        })
        .collect()
}

pub fn write_landmarks<W: Write>(w: W, landmarks: &[Landmark]) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    for l in landmarks {
        wtr.serialize(LandmarkRow {
            id: l.id.0.clone(),
            name: l.name.clone(),
            lat: l.location.lat,
            lon: l.location.lon,
            significance: Some(l.significance),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckinRow {
    traveller: String,
    landmark: String,
    timestamp: i64,
    #[serde(default)]
    weight: Option<f64>,
}

pub fn read_checkins<R: Read>(r: R) -> Result<Vec<VisitEvent>, FormatError> {
    read_rows::<_, CheckinRow>(r)?
        .into_iter()
        .map(|(row, pos)| {
            let weight = row.weight.unwrap_or(1.0);
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(parse_error(pos.as_ref(), format!("weight must be positive, got {weight}")));
            }
            Ok(VisitEvent { traveller: row.traveller, landmark: LandmarkId(row.landmark), timestamp: row.timestamp, weight })
        })
        .collect()
}

pub fn write_checkins<W: Write>(w: W, events: &[VisitEvent]) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    for e in events {
        wtr.serialize(CheckinRow {
            traveller: e.traveller.clone(),
            landmark: e.landmark.0.clone(),
            timestamp: e.timestamp,
            weight: Some(e.weight),
        })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SignificanceRow {
    landmark: String,
    significance: f64,
}

pub fn read_significance<R: Read>(r: R) -> Result<SignificanceScores, FormatError> {
    let mut scores = SignificanceScores::default();
    for (row, pos) in read_rows::<_, SignificanceRow>(r)? {
        if scores.0.insert(LandmarkId(row.landmark.clone()), row.significance).is_some() {
            return Err(parse_error(pos.as_ref(), format!("landmark `{}` listed twice", row.landmark)));
        }
    }
    Ok(scores)
}

pub fn write_significance<W: Write>(w: W, scores: &SignificanceScores) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    for (id, s) in scores.iter() {
        wtr.serialize(SignificanceRow { landmark: id.0.clone(), significance: s })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RouteRow {
    #[serde(default)]
    source: String,
    landmarks: String,
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(';').map(str::trim).filter(|x| !x.is_empty())
}

/// One candidate set: each row is a source tag and `;`-separated landmark ids.
pub fn read_candidate_set<R: Read>(r: R) -> Result<CandidateSet, FormatError> {
    let mut routes = Vec::new();
    for (row, pos) in read_rows::<_, RouteRow>(r)? {
        let ids = split_list(&row.landmarks).map(LandmarkId::from).collect();
        let route = LandmarkRoute::new(ids).map_err(|e| parse_error(pos.as_ref(), e.to_string()))?;
        let tag = if row.source.is_empty() { format!("r{}", routes.len() + 1) } else { row.source };
        routes.push((route, tag));
    }
    Ok(CandidateSet::new(routes)?)
}

pub fn write_candidate_set<W: Write>(w: W, set: &CandidateSet) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    for c in set.routes() {
        let ids: Vec<&str> = c.route.ids().iter().map(|l| l.as_str()).collect();
        wtr.serialize(RouteRow { source: c.provenance.join("+"), landmarks: ids.join(";") })?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRouteRow {
    #[serde(default)]
    source: String,
    points: String,
}

/// Raw routes: a source tag and `;`-separated `lat lon` pairs.
pub fn read_raw_routes<R: Read>(r: R) -> Result<Vec<(String, RawRoute)>, FormatError> {
    read_rows::<_, RawRouteRow>(r)?
        .into_iter()
        .map(|(row, pos)| {
            let points = split_list(&row.points)
                .map(|pair| {
                    let mut it = pair.split_whitespace().map(str::parse::<f64>);
                    match (it.next(), it.next(), it.next()) {
                        (Some(Ok(lat)), Some(Ok(lon)), None) => {
                            GeoPoint::new(lat, lon).map_err(|e| parse_error(pos.as_ref(), e.to_string()))
                        }
                        _ => Err(parse_error(pos.as_ref(), format!("bad point `{pair}`, expected `lat lon`"))),
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let route = RawRoute::new(points).map_err(|e| parse_error(pos.as_ref(), e.to_string()))?;
            Ok((row.source, route))
        })
        .collect()
}

/// Worker profiles, one JSON object per line. Blank lines are skipped.
pub fn read_workers<R: Read>(r: R) -> Result<Vec<WorkerProfile>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FormatError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_workers<W: Write>(mut w: W, workers: &[WorkerProfile]) -> Result<(), FormatError> {
    for p in workers {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CellRow {
    worker: String,
    landmark: String,
    value: f64,
}

/// Non-zero cells of a worker × landmark matrix. Rows and columns appear in
/// order of first mention.
pub fn read_matrix<R: Read>(r: R) -> Result<WorkerLandmarkMatrix, FormatError> {
    let rows = read_rows::<_, CellRow>(r)?;
    let mut workers = Vec::new();
    let mut landmarks = Vec::new();
    for (row, _) in &rows {
        if !workers.iter().any(|w: &crate::familiarity::WorkerId| w.0 == row.worker) {
            workers.push(row.worker.as_str().into());
        }
        if !landmarks.iter().any(|l: &LandmarkId| l.0 == row.landmark) {
            landmarks.push(row.landmark.as_str().into());
        }
    }
    let mut m = WorkerLandmarkMatrix::new(workers, landmarks);
    for (row, pos) in rows {
        if !row.value.is_finite() {
            return Err(parse_error(pos.as_ref(), "value is not finite"));
        }
        let i = m.worker_index(&row.worker.as_str().into()).expect("collected");
        let j = m.landmark_index(&row.landmark.as_str().into()).expect("collected");
        m.set(i, j, row.value);
    }
    Ok(m)
}

pub fn write_matrix<W: Write>(w: W, m: &WorkerLandmarkMatrix) -> Result<(), FormatError> {
    let mut wtr = csv::Writer::from_writer(w);
    for (i, j, v) in m.iter() {
        wtr.serialize(CellRow { worker: m.workers()[i].0.clone(), landmark: m.landmarks()[j].0.clone(), value: v })?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn open(path: &Path) -> Result<File, FormatError> {
    Ok(File::open(path)?)
}

pub fn create(path: &Path) -> Result<File, FormatError> {
    Ok(File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::familiarity::AnswerHistory;

    #[test]
    fn landmarks_with_and_without_significance() {
        let text = "id,name,lat,lon,significance\na,Gate,31.2,121.4,0.7\nb,,31.3,121.5,\n";
        let ls = read_landmarks(text.as_bytes()).unwrap();
        assert_eq!(ls[0].significance, 0.7);
        assert_eq!(ls[1].name, "b");
        assert_eq!(ls[1].significance, 0.0);
        let bare = read_landmarks("id,name,lat,lon\nc,Hall,1,2\n".as_bytes()).unwrap();
        assert_eq!(bare[0].location, GeoPoint { lat: 1.0, lon: 2.0 });

        let mut buf = Vec::new();
        write_landmarks(&mut buf, &ls).unwrap();
        assert_eq!(read_landmarks(buf.as_slice()).unwrap(), ls);
    }

    #[test]
    fn bad_coordinates_report_line() {
        let err = read_landmarks("id,name,lat,lon\na,x,1,2\nb,y,95,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn checkins_default_weight() {
        let text = "traveller,landmark,timestamp,weight\nt1,a,100,\nt2,b,200,2.5\n";
        let ev = read_checkins(text.as_bytes()).unwrap();
        assert_eq!(ev[0].weight, 1.0);
        assert_eq!(ev[1].weight, 2.5);
        assert!(read_checkins("traveller,landmark,timestamp,weight\nt,a,1,-1\n".as_bytes()).is_err());
        let mut buf = Vec::new();
        write_checkins(&mut buf, &ev).unwrap();
        assert_eq!(read_checkins(buf.as_slice()).unwrap(), ev);
    }

    #[test]
    fn candidate_set_roundtrip() {
        let text = "source,landmarks\nmpr,a;b;c\nldr,a;d\nmfp,a;b;c\n";
        let set = read_candidate_set(text.as_bytes()).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.routes()[0].provenance, vec!["mpr".to_string(), "mfp".to_string()]);
        let mut buf = Vec::new();
        write_candidate_set(&mut buf, &set).unwrap();
        let back = read_candidate_set(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.routes()[0].route, set.routes()[0].route);
        assert!(read_candidate_set("source,landmarks\nx,a;a\n".as_bytes()).is_err());
    }

    #[test]
    fn raw_routes() {
        let text = "source,points\ntaxi,31.2 121.4; 31.21 121.41\n";
        let r = read_raw_routes(text.as_bytes()).unwrap();
        assert_eq!(r[0].0, "taxi");
        assert_eq!(r[0].1.points().len(), 2);
        assert!(read_raw_routes("source,points\nx,31.2 121.4\n".as_bytes()).is_err());
        assert!(read_raw_routes("source,points\nx,31.2;1 2\n".as_bytes()).is_err());
    }

    #[test]
    fn workers_jsonl() {
        let text = r#"{"id":"w1","home":{"lat":1,"lon":2},"work":{"lat":1,"lon":2},"frequented":{"lat":1,"lon":2},"history":{"a":{"correct":2,"wrong":1}}}

{"id":"w2","home":{"lat":1,"lon":2},"work":{"lat":1,"lon":2},"frequented":{"lat":1,"lon":2},"response_hours":[1.5],"outstanding_tasks":2}
"#;
        let ws = read_workers(text.as_bytes()).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(ws[0].history[&LandmarkId::from("a")], AnswerHistory { correct: 2, wrong: 1 });
        assert_eq!(ws[1].outstanding_tasks, 2);
        let mut buf = Vec::new();
        write_workers(&mut buf, &ws).unwrap();
        assert_eq!(read_workers(buf.as_slice()).unwrap(), ws);
        assert!(matches!(read_workers("{}\n".as_bytes()), Err(FormatError::Parse { line: 1, .. })));
    }

    #[test]
    fn matrix_and_significance_roundtrip() {
        let m = read_matrix("worker,landmark,value\nw2,b,1.5\nw1,a,0.25\n".as_bytes()).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert_eq!(m.value(&"w1".into(), &"a".into()), 0.25);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap().value(&"w2".into(), &"b".into()), 1.5);

        let s = read_significance("landmark,significance\na,0.5\nb,1\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_significance(&mut buf, &s).unwrap();
        assert_eq!(read_significance(buf.as_slice()).unwrap(), s);
        assert!(read_significance("landmark,significance\na,1\na,2\n".as_bytes()).is_err());
    }
}
