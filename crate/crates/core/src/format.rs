//! On-disk formats: descriptor files, CSV metadata, index files and PCA models.
//!
//! All binary formats are little-endian with a four-byte magic and a `u32`
//! version. Vectors are stored as `f32`.
//!
//! | file        | magic  | header after version            | record                                         |
//! |-------------|--------|---------------------------------|------------------------------------------------|
//! | descriptors | `PMDV` | `u32 d`, `u64 count`            | `u16 id_len`, id, `d × f32`                    |
//! | index       | `PMIX` | `u8 method`, `u32 d`, `u64 count` | `u16 id_len`, id, `u32 n`, `f32 ridge`, `d × f32` |
//! | pca model   | `PMPC` | `u32 d`, `u32 d_out`            | mean `d × f32`, components `d_out·d × f32`     |

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::corpus::{group_by_location, Corpus, GeoPosition, ImageRecord, Side, SpreadWarning};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, PcaModel};
use crate::memvec::{AggMethod, MemoryVector};
use crate::retrieval::{IndexEntry, MemoryIndex};

pub const DESCRIPTOR_MAGIC: &[u8; 4] = b"PMDV";
pub const INDEX_MAGIC: &[u8; 4] = b"PMIX";
pub const PCA_MAGIC: &[u8; 4] = b"PMPC";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn offset(&self) -> u64 {
        self.pos as u64
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(
                self.offset(),
                format!("truncated {what}: need {n} bytes, {} left", self.buf.len() - self.pos),
            ));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        let at = self.offset();
        let version = self.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::format(at, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        let at = self.offset();
        let v = f32::from_le_bytes(self.take(4, what)?.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(at, format!("non-finite {what}")));
        }
        Ok(v)
    }

    fn vector(&mut self, d: usize, what: &str) -> Result<Vec<f64>> {
        (0..d).map(|_| self.f32(what).map(f64::from)).collect()
    }

    fn id(&mut self) -> Result<String> {
        let len = self.u16("id length")? as usize;
        let at = self.offset();
        let bytes = self.take(len, "id")?;
        let id = std::str::from_utf8(bytes)
            .map_err(|e| Error::format(at, format!("id is not utf-8: {e}")))?;
        if id.is_empty() {
            return Err(Error::format(at, "empty id"));
        }
        Ok(id.to_string())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::format(
                self.offset(),
                format!("{} trailing bytes", self.buf.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn put_id(out: &mut Vec<u8>, id: &str) -> Result<()> {
    let len = u16::try_from(id.len())
        .map_err(|_| Error::validation(format!("id longer than 65535 bytes: {id:.32}…")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(id.as_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::validation(format!("dimension {d} exceeds u32")))
}

/// Serializes `vectors` (each of length `d`) with their ids.
pub fn encode_descriptors<V: AsRef<[f64]>>(ids: &[String], vectors: &[V]) -> Result<Vec<u8>> {
    if ids.len() != vectors.len() {
        return Err(Error::validation("ids and vectors differ in length"));
    }
    let d = vectors.first().map_or(0, |v| v.as_ref().len());
    let mut out = Vec::with_capacity(20 + vectors.len() * (d * 4 + 16));
    out.extend_from_slice(DESCRIPTOR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32(d)?.to_le_bytes());
    out.extend_from_slice(&(vectors.len() as u64).to_le_bytes());
    for (id, v) in ids.iter().zip(vectors) {
        let v = v.as_ref();
        if v.len() != d {
            return Err(Error::validation(format!("vector {id} has dimension {}, expected {d}", v.len())));
        }
        put_id(&mut out, id)?;
        put_f32s(&mut out, v.iter().copied());
    }
    Ok(out)
}

/// Parses a descriptor file into ids and a `d × count` matrix (one column per id).
pub fn decode_descriptors(bytes: &[u8]) -> Result<(Vec<String>, Matrix)> {
    let mut r = Reader::new(bytes);
    r.magic(DESCRIPTOR_MAGIC)?;
    let d = r.u32("dimension")? as usize;
    let at = r.offset();
    let count = r.u64("count")?;
    if count == 0 {
        return Err(Error::format(at, "empty corpus: descriptor file holds no vectors"));
    }
    if d == 0 {
        return Err(Error::format(8, "zero dimension"));
    }
    let count = usize::try_from(count).map_err(|_| Error::format(at, "count overflows usize"))?;
    // the smallest record is 2 + 1 + 4d bytes
    if (bytes.len() - r.pos) / (3 + 4 * d) < count {
        return Err(Error::format(at, format!("truncated payload for {count} vectors")));
    }
    let mut ids = Vec::with_capacity(count);
    let mut cols = Vec::with_capacity(count);
    for _ in 0..count {
        ids.push(r.id()?);
        cols.push(r.vector(d, "descriptor entry")?);
    }
    r.finish()?;
    Ok((ids, Matrix::from_columns(&cols)?))
}

pub fn save_descriptors<V: AsRef<[f64]>>(path: impl AsRef<Path>, ids: &[String], vectors: &[V]) -> Result<()> {
    write_file(path.as_ref(), &encode_descriptors(ids, vectors)?)
}

pub fn load_descriptors(path: impl AsRef<Path>) -> Result<(Vec<String>, Matrix)> {
    decode_descriptors(&read_file(path.as_ref())?)
}

/// One row of a metadata CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataRow {
    pub image_id: String,
    pub location_id: String,
    pub position: GeoPosition,
}

pub fn parse_metadata<R: std::io::Read>(input: R) -> Result<Vec<MetadataRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let lat_lon = match headers.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["image_id", "location_id", "lat", "lon"] => true,
        ["image_id", "location_id", "x", "y"] => false,
        other => {
            return Err(Error::validation(format!(
                "metadata header must be image_id,location_id,lat,lon or image_id,location_id,x,y; got {}",
                other.join(",")
            )))
        }
    };
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<f64> {
            rec[k].parse::<f64>().map_err(|e| {
                Error::validation(format!("metadata row {}: bad coordinate {:?}: {e}", line + 1, &rec[k]))
            })
        };
        let (a, b) = (num(2)?, num(3)?);
        let position = if lat_lon {
            GeoPosition::lat_lon(a, b)?
        } else {
            GeoPosition::planar(a, b)?
        };
        rows.push(MetadataRow {
            image_id: rec[0].to_string(),
            location_id: rec[1].to_string(),
            position,
        });
    }
    Ok(rows)
}

pub fn read_metadata(path: impl AsRef<Path>) -> Result<Vec<MetadataRow>> {
    let path = path.as_ref();
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_metadata(f)
}

pub fn render_metadata(rows: &[MetadataRow]) -> Result<String> {
    let lat_lon = rows.first().is_some_and(|r| r.position.is_lat_lon());
    let mut out = String::from(if lat_lon {
        "image_id,location_id,lat,lon\n"
    } else {
        "image_id,location_id,x,y\n"
    });
    for r in rows {
        if r.position.is_lat_lon() != lat_lon {
            return Err(Error::validation("metadata mixes lat/lon and planar positions"));
        }
        let (a, b) = r.position.coords();
        out.push_str(&format!("{},{},{a},{b}\n", csv_field(&r.image_id), csv_field(&r.location_id)));
    }
    Ok(out)
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Joins descriptors with metadata by image id, in descriptor-file order.
pub fn join_records(ids: &[String], descriptors: &Matrix, meta: &[MetadataRow]) -> Result<Vec<ImageRecord>> {
    let by_id: HashMap<&str, &MetadataRow> = meta.iter().map(|m| (m.image_id.as_str(), m)).collect();
    ids.iter()
        .enumerate()
        .map(|(j, id)| {
            let m = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::validation(format!("no metadata for image {id}")))?;
            Ok(ImageRecord {
                image_id: id.clone(),
                location_id: m.location_id.clone(),
                position: m.position,
                descriptor: descriptors.column(j),
            })
        })
        .collect()
}

/// Loads a descriptor file and its metadata and groups them by location.
pub fn load_corpus(
    descriptors: impl AsRef<Path>,
    metadata: impl AsRef<Path>,
    side: Side,
) -> Result<(Corpus, Vec<SpreadWarning>)> {
    let (ids, m) = load_descriptors(descriptors)?;
    let meta = read_metadata(metadata)?;
    group_by_location(join_records(&ids, &m, &meta)?, side)
}

pub fn save_corpus(corpus: &Corpus, descriptors: impl AsRef<Path>, metadata: impl AsRef<Path>) -> Result<()> {
    let ids: Vec<String> = corpus.images().map(|r| r.image_id.clone()).collect();
    let vecs: Vec<&[f64]> = corpus.images().map(|r| r.descriptor.as_slice()).collect();
    save_descriptors(descriptors, &ids, &vecs)?;
    let rows: Vec<MetadataRow> = corpus
        .images()
        .map(|r| MetadataRow {
            image_id: r.image_id.clone(),
            location_id: r.location_id.clone(),
            position: r.position,
        })
        .collect();
    let path = metadata.as_ref();
    fs::write(path, render_metadata(&rows)?).map_err(|e| Error::io(path, e))
}

pub fn encode_index(index: &MemoryIndex) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(21 + index.len() * (index.d * 4 + 24));
    out.extend_from_slice(INDEX_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(index.method.code());
    out.extend_from_slice(&dim_u32(index.d)?.to_le_bytes());
    out.extend_from_slice(&(index.len() as u64).to_le_bytes());
    for e in &index.entries {
        put_id(&mut out, &e.location_id)?;
        let n = u32::try_from(e.vector.source_count)
            .map_err(|_| Error::validation("source count exceeds u32"))?;
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&(e.vector.ridge_used as f32).to_le_bytes());
        put_f32s(&mut out, e.vector.values.iter().copied());
    }
    Ok(out)
}

pub fn decode_index(bytes: &[u8]) -> Result<MemoryIndex> {
    let mut r = Reader::new(bytes);
    r.magic(INDEX_MAGIC)?;
    let at = r.offset();
    let method = AggMethod::from_code(r.u8("method")?)
        .ok_or_else(|| Error::format(at, "unknown aggregation method code"))?;
    let d = r.u32("dimension")? as usize;
    let at = r.offset();
    let count = r.u64("count")?;
    let count = usize::try_from(count).map_err(|_| Error::format(at, "count overflows usize"))?;
    if count > 0 && (bytes.len() - r.pos) / (11 + 4 * d) < count {
        return Err(Error::format(at, format!("truncated payload for {count} entries")));
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let location_id = r.id()?;
        let source_count = r.u32("source count")? as usize;
        let ridge_used = f64::from(r.f32("ridge")?);
        let values = r.vector(d, "index entry")?;
        entries.push(IndexEntry {
            location_id,
            vector: MemoryVector {
                values,
                method,
                source_count,
                ridge_used,
                overcomplete: source_count >= d,
            },
        });
    }
    r.finish()?;
    MemoryIndex::new(method, d, entries)
}

pub fn save_index(path: impl AsRef<Path>, index: &MemoryIndex) -> Result<()> {
    write_file(path.as_ref(), &encode_index(index)?)
}

pub fn load_index(path: impl AsRef<Path>) -> Result<MemoryIndex> {
    decode_index(&read_file(path.as_ref())?)
}

/// Serializes a PCA model. Whitened models cannot be stored: the format has
/// no room for the per-component variances.
pub fn encode_pca(model: &PcaModel) -> Result<Vec<u8>> {
    if model.whiten {
        return Err(Error::validation("whitened PCA models cannot be serialized"));
    }
    let (d, d_out) = (model.d(), model.d_out());
    let mut out = Vec::with_capacity(16 + 4 * d * (d_out + 1));
    out.extend_from_slice(PCA_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&dim_u32(d)?.to_le_bytes());
    out.extend_from_slice(&dim_u32(d_out)?.to_le_bytes());
    put_f32s(&mut out, model.mean.iter().copied());
    put_f32s(&mut out, model.components.data().iter().copied());
    Ok(out)
}

pub fn decode_pca(bytes: &[u8]) -> Result<PcaModel> {
    let mut r = Reader::new(bytes);
    r.magic(PCA_MAGIC)?;
    let d = r.u32("d")? as usize;
    let at = r.offset();
    let d_out = r.u32("d_out")? as usize;
    if d_out == 0 || d_out > d {
        return Err(Error::format(at, format!("d_out {d_out} invalid for d {d}")));
    }
    let mean = r.vector(d, "mean")?;
    let comps = r.vector(d * d_out, "component")?;
    r.finish()?;
    PcaModel::from_parts(mean, Matrix::new(d_out, d, comps)?)
}

pub fn save_pca(path: impl AsRef<Path>, model: &PcaModel) -> Result<()> {
    write_file(path.as_ref(), &encode_pca(model)?)
}

pub fn load_pca(path: impl AsRef<Path>) -> Result<PcaModel> {
    decode_pca(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("img{i}")).collect()
    }

    #[test]
    fn descriptor_header_layout() {
        let bytes = encode_descriptors(&ids(1), &[vec![1.0, 2.0]]).unwrap();
        assert_eq!(&bytes[0..4], b"PMDV");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1);
        assert_eq!(u16::from_le_bytes(bytes[20..22].try_into().unwrap()), 4);
        assert_eq!(&bytes[22..26], b"img0");
        assert_eq!(f32::from_le_bytes(bytes[26..30].try_into().unwrap()), 1.0);
        assert_eq!(bytes.len(), 34);
    }

    #[test]
    fn pittsburgh_shaped_location() {
        let vecs: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64 * 0.5; 4096]).collect();
        let bytes = encode_descriptors(&ids(24), &vecs).unwrap();
        let (got_ids, m) = decode_descriptors(&bytes).unwrap();
        assert_eq!(m.shape(), (4096, 24));
        assert_eq!(got_ids.len(), 24);
    }

    #[test]
    fn empty_descriptor_file_rejected() {
        let bytes = encode_descriptors::<Vec<f64>>(&[], &[]).unwrap();
        let err = decode_descriptors(&bytes).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 12, .. }), "{err}");
    }

    #[test]
    fn bad_magic_and_truncation_report_offsets() {
        let mut bytes = encode_descriptors(&ids(2), &[vec![1.0; 3], vec![2.0; 3]]).unwrap();
        let full = bytes.clone();
        bytes[0] = b'X';
        assert!(matches!(decode_descriptors(&bytes), Err(Error::Format { offset: 0, .. })));
        let cut = &full[..full.len() - 2];
        assert!(matches!(decode_descriptors(cut), Err(Error::Format { .. })));
        let mut nan = full.clone();
        let at = nan.len() - 4;
        nan[at..].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode_descriptors(&nan) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, at),
            other => panic!("{other:?}"),
        }
        let mut extra = full;
        extra.push(0);
        assert!(decode_descriptors(&extra).is_err());
    }

    #[test]
    fn metadata_parse_and_render() {
        let csv = "image_id,location_id,lat,lon\na,l1,40.44,-80\nb,l1,40.44,-79.9997\n";
        let rows = parse_metadata(csv.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].position, GeoPosition::LatLon { lat: 40.44, lon: -79.9997 });
        assert_eq!(render_metadata(&rows).unwrap(), csv);

        let planar = "image_id,location_id,x,y\na,l,1.5,2\n";
        let rows = parse_metadata(planar.as_bytes()).unwrap();
        assert_eq!(rows[0].position, GeoPosition::Planar { x: 1.5, y: 2.0 });

        assert!(parse_metadata("image_id,location_id,lat,y\n".as_bytes()).is_err());
        assert!(parse_metadata("image_id,location_id,x,y\na,l,zz,2\n".as_bytes()).is_err());
        assert!(parse_metadata("image_id,location_id,lat,lon\na,l,95,2\n".as_bytes()).is_err());
    }

    #[test]
    fn join_requires_metadata() {
        let m = Matrix::from_columns(&[vec![1.0]]).unwrap();
        assert!(join_records(&ids(1), &m, &[]).is_err());
    }

    #[test]
    fn pca_round_trip_and_whiten_refused() {
        let comps = Matrix::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
        let model = PcaModel::from_parts(vec![0.5, -1.0, 2.0], comps).unwrap();
        let bytes = encode_pca(&model).unwrap();
        assert_eq!(&bytes[..4], b"PMPC");
        assert_eq!(bytes.len(), 16 + 4 * 3 + 4 * 3);
        assert_eq!(decode_pca(&bytes).unwrap(), model);
        let mut w = model;
        w.whiten = true;
        assert!(encode_pca(&w).is_err());
    }
}
