//! TNTP network, trips, and node-coordinate files.
//!
//! Only `init_node`, `term_node` and `free_flow_time` of the network records
//! are used; the remaining columns are read but ignored.

use std::collections::BTreeMap;

use super::{Arc, RoadNetwork};
use crate::demand::Request;
use crate::{Error, NodeId, Result};

/// Header tags of a TNTP file, keyed without the angle brackets.
#[derive(Debug, Clone, Default)]
pub struct TntpMetadata {
    pub tags: BTreeMap<String, String>,
    /// One-based line number of the first line after `<END OF METADATA>`.
    pub body_start: usize,
}

impl TntpMetadata {
    pub fn get(&self, tag: &str) -> Option<&str> {
        self.tags.get(tag).map(String::as_str)
    }

    fn require_count(&self, tag: &str) -> Result<usize> {
        let raw = self.get(tag).ok_or_else(|| {
            Error::parse(self.body_start, format!("missing metadata tag <{tag}>"))
        })?;
        raw.trim()
            .parse::<usize>()
            .map_err(|_| Error::parse(self.body_start, format!("<{tag}> is not a count: {raw}")))
    }
}

/// Reads the `<TAG> value` header up to `<END OF METADATA>`.
pub fn read_metadata(text: &str) -> Result<TntpMetadata> {
    let mut meta = TntpMetadata::default();
    let mut last = 0;
    for (idx, line) in text.lines().enumerate() {
        last = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let Some(rest) = line.strip_prefix('<') else {
            return Err(Error::parse(
                idx + 1,
                "expected a metadata tag; missing <END OF METADATA>",
            ));
        };
        let Some(close) = rest.find('>') else {
            return Err(Error::parse(idx + 1, "unterminated metadata tag"));
        };
        let tag = rest[..close].trim().to_ascii_uppercase();
        if tag == "END OF METADATA" {
            meta.body_start = idx + 2;
            return Ok(meta);
        }
        meta.tags.insert(tag, rest[close + 1..].trim().to_string());
    }
    Err(Error::parse(last, "missing metadata tag <END OF METADATA>"))
}

fn parse_node(token: &str, n_nodes: usize, line: usize) -> Result<NodeId> {
    let id: usize = token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid node index {token:?}")))?;
    if id == 0 || id > n_nodes {
        return Err(Error::parse(
            line,
            format!("node index {id} outside 1..{n_nodes}"),
        ));
    }
    Ok(id - 1)
}

fn parse_number(token: &str, what: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::parse(line, format!("invalid {what} {token:?}")))
}

fn parse_net(text: &str, time_scale: f64) -> Result<(usize, Vec<Arc>)> {
    let meta = read_metadata(text)?;
    let n_nodes = meta.require_count("NUMBER OF NODES")?;
    let n_links = meta.require_count("NUMBER OF LINKS")?;

    let mut arcs = Vec::with_capacity(n_links);
    for (idx, line) in text.lines().enumerate().skip(meta.body_start - 1) {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        let fields: Vec<&str> = line
            .split_whitespace()
            .map(|f| f.trim_end_matches(';'))
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() < 5 {
            return Err(Error::parse(
                lineno,
                format!("expected at least 5 link fields, found {}", fields.len()),
            ));
        }
        let tail = parse_node(fields[0], n_nodes, lineno)?;
        let head = parse_node(fields[1], n_nodes, lineno)?;
        let fft = parse_number(fields[4], "free_flow_time", lineno)?;
        arcs.push(Arc {
            tail,
            head,
            travel_time: fft * time_scale,
        });
    }
    if arcs.len() != n_links {
        return Err(Error::parse(
            meta.body_start,
            format!(
                "<NUMBER OF LINKS> is {n_links} but {} link records were found",
                arcs.len()
            ),
        ));
    }
    Ok((n_nodes, arcs))
}

fn parse_trips(text: &str, n_nodes: usize) -> Result<Vec<Request>> {
    let meta = read_metadata(text)?;
    let n_zones = meta.require_count("NUMBER OF ZONES")?;
    if n_zones > n_nodes {
        return Err(Error::parse(
            meta.body_start,
            format!("{n_zones} zones but only {n_nodes} nodes"),
        ));
    }

    let mut flows: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut origin: Option<NodeId> = None;
    let mut intra = 0.0;
    for (idx, line) in text.lines().enumerate().skip(meta.body_start - 1) {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            origin = Some(parse_node(rest.trim(), n_zones, lineno)?);
            continue;
        }
        let o = origin.ok_or_else(|| Error::parse(lineno, "trip entry before any Origin block"))?;
        for entry in line.split(';') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (dest, flow) = entry
                .split_once(':')
                .ok_or_else(|| Error::parse(lineno, format!("malformed trip entry {entry:?}")))?;
            let d = parse_node(dest.trim(), n_zones, lineno)?;
            let flow = parse_number(flow.trim(), "trip flow", lineno)?;
            if !flow.is_finite() || flow < 0.0 {
                return Err(Error::parse(lineno, format!("negative trip flow {flow}")));
            }
            if d == o {
                intra += flow;
                continue;
            }
            if flow > 0.0 {
                *flows.entry((o, d)).or_insert(0.0) += flow;
            }
        }
    }
    if intra > 0.0 {
        log::info!("dropped {intra} intra-zonal trips");
    }
    Ok(flows
        .into_iter()
        .map(|((o, d), rate)| Request::new_unchecked(o, d, rate))
        .collect())
}

fn parse_nodes(text: &str, n_nodes: usize) -> Result<Vec<[f64; 2]>> {
    let mut coords: Vec<Option<[f64; 2]>> = vec![None; n_nodes];
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line
            .split_whitespace()
            .map(|f| f.trim_end_matches(';'))
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() || fields[0].starts_with('~') || fields[0].parse::<i64>().is_err() {
            // Header or comment.
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::parse(lineno, "expected `node x y`"));
        }
        let v = parse_node(fields[0], n_nodes, lineno)?;
        let x = parse_number(fields[1], "x coordinate", lineno)?;
        let y = parse_number(fields[2], "y coordinate", lineno)?;
        coords[v] = Some([x, y]);
    }
    coords
        .into_iter()
        .enumerate()
        .map(|(v, c)| {
            c.ok_or_else(|| Error::parse(0, format!("no coordinates for node {}", v + 1)))
        })
        .collect()
}

/// Parses TNTP network and trips files (and optionally node coordinates).
///
/// Arc travel times are the `free_flow_time` column, taken as minutes.
pub fn parse_tntp(
    net_text: &str,
    trips_text: &str,
    node_coords_text: Option<&str>,
) -> Result<(RoadNetwork, Vec<Request>)> {
    parse_tntp_scaled(net_text, trips_text, node_coords_text, 1.0)
}

/// Like [`parse_tntp`], multiplying every `free_flow_time` by `time_scale` to
/// convert it to minutes.
pub fn parse_tntp_scaled(
    net_text: &str,
    trips_text: &str,
    node_coords_text: Option<&str>,
    time_scale: f64,
) -> Result<(RoadNetwork, Vec<Request>)> {
    if !(time_scale.is_finite() && time_scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time scale must be positive, got {time_scale}"
        )));
    }
    let (n_nodes, arcs) = parse_net(net_text, time_scale)?;
    let coords = node_coords_text
        .map(|t| parse_nodes(t, n_nodes))
        .transpose()?;
    let requests = parse_trips(trips_text, n_nodes)?;
    let net = RoadNetwork::new(n_nodes, arcs, coords)?;
    Ok((net, requests))
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET2: &str = "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n\
        ~ init term cap len fft b power speed toll type ;\n\
        1 2 100 5 5 0.15 4 0 0 1 ;\n";

    const NET3: &str = "<NUMBER OF ZONES> 3\n<NUMBER OF NODES> 3\n<NUMBER OF LINKS> 3\n<END OF METADATA>\n\n\
        ~ init term cap len fft b power speed toll type ;\n\
        \t1\t2\t100\t1\t2\t0.15\t4\t0\t0\t1\t;\n\
        \t2\t3\t100\t1\t3\t0.15\t4\t0\t0\t1\t;\n\
        \t3\t1\t100\t1\t4\t0.15\t4\t0\t0\t1\t;\n";

    #[test]
    fn two_node_file_is_disconnected() {
        let trips = "<NUMBER OF ZONES> 2\n<END OF METADATA>\nOrigin 1\n 2 : 3.0;\n";
        let (n, arcs) = parse_net(NET2, 1.0).unwrap();
        assert_eq!(n, 2);
        assert_eq!(arcs.len(), 1);
        assert_eq!(arcs[0].travel_time, 5.0);
        let reqs = parse_trips(trips, 2).unwrap();
        assert_eq!(reqs.len(), 1);
        assert_eq!((reqs[0].origin, reqs[0].destination, reqs[0].rate), (0, 1, 3.0));
        let err = parse_tntp(NET2, trips, None).unwrap_err();
        assert!(matches!(err, Error::Disconnected { .. }), "{err}");
    }

    #[test]
    fn intra_zonal_and_duplicate_trips() {
        let trips = "<NUMBER OF ZONES> 3\n<TOTAL OD FLOW> 13\n<END OF METADATA>\n\n\
            Origin 1\n  1 : 4.0;  2 : 1.0;  3 : 0.0;\n  2 : 2.0;\nOrigin 2\n  3 : 6.0;\n";
        let (net, reqs) = parse_tntp(NET3, trips, None).unwrap();
        assert_eq!(net.node_count(), 3);
        assert_eq!(net.arc_count(), 3);
        assert_eq!(reqs.len(), 2);
        assert_eq!((reqs[0].origin, reqs[0].destination, reqs[0].rate), (0, 1, 3.0));
        assert_eq!((reqs[1].origin, reqs[1].destination, reqs[1].rate), (1, 2, 6.0));
    }

    #[test]
    fn missing_header_tag_is_named() {
        let net = "<NUMBER OF NODES> 3\n<END OF METADATA>\n1 2 0 0 1 ;\n";
        let err = parse_net(net, 1.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("NUMBER OF LINKS"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");

        let err = read_metadata("<NUMBER OF NODES> 3\n").unwrap_err();
        assert!(err.to_string().contains("END OF METADATA"));
    }

    #[test]
    fn out_of_range_node_is_a_parse_error() {
        let net = "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n1 3 0 0 1 ;\n";
        let err = parse_net(net, 1.0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn non_positive_time_is_a_validation_error() {
        let net = "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 2\n<END OF METADATA>\n\
            1 2 0 0 0 ;\n2 1 0 0 1 ;\n";
        let trips = "<NUMBER OF ZONES> 2\n<END OF METADATA>\n";
        let err = parse_tntp(net, trips, None).unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(_)), "{err}");
    }

    #[test]
    fn time_scale_and_coordinates() {
        let trips = "<NUMBER OF ZONES> 3\n<END OF METADATA>\n";
        let nodes = "Node X Y ;\n1 0 0 ;\n2 1.5 0 ;\n3 0 2 ;\n";
        let (net, reqs) = parse_tntp_scaled(NET3, trips, Some(nodes), 0.5).unwrap();
        assert!(reqs.is_empty());
        assert_eq!(net.travel_times(), vec![1.0, 1.5, 2.0]);
        assert_eq!(net.coords().unwrap()[1], [1.5, 0.0]);
    }
}
