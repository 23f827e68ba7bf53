import numpy as np
import pytest

from facefair.mesh import NormalField
from facefair.meshio import (
    MeshIOError,
    read_config,
    read_mesh,
    read_normal_field,
    write_histogram_csv,
    write_mesh,
    write_normal_field,
    write_report,
)

from conftest import jittered_grid


PLY_WITH_NORMALS = """ply
format ascii 1.0
comment hand-written fixture
element vertex 4
property float x
property float y
property float z
property float nx
property float ny
property float nz
element face 2
property list uchar int vertex_indices
end_header
0 0 0 0 0 1
1 0 0 0 0 1
1 1 0 0 0 2
0 1 0 1 0 0
3 0 1 2
3 0 2 3
"""


class TestObj:
    def test_tetra_round_trip(self, tmp_path, tetrahedron):
        path = tmp_path / "tetra.obj"
        write_mesh(tetrahedron, path)
        back = read_mesh(path)
        assert np.array_equal(back.faces, tetrahedron.faces)
        assert np.abs(back.vertices - tetrahedron.vertices).max() < 1e-6

    def test_jittered_round_trip_relative(self, tmp_path):
        mesh = jittered_grid(6, seed=3, amplitude=0.2)
        path = tmp_path / "grid.obj"
        write_mesh(mesh, path)
        back = read_mesh(path)
        scale = np.abs(mesh.vertices).max()
        assert np.abs(back.vertices - mesh.vertices).max() <= 1e-6 * scale

    def test_quad_face_rejected_with_line(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(MeshIOError, match=":5"):
            read_mesh(path)

    def test_malformed_vertex_line(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 zero 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")
        with pytest.raises(MeshIOError, match=":1"):
            read_mesh(path)

    def test_slash_references_and_comments(self, tmp_path):
        path = tmp_path / "slashes.obj"
        path.write_text(
            "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n"
        )
        mesh = read_mesh(path)
        assert mesh.n_faces == 1

    def test_nonpositive_index_rejected(self, tmp_path):
        path = tmp_path / "neg.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -1 2 3\n")
        with pytest.raises(MeshIOError, match="positive"):
            read_mesh(path)


class TestPly:
    def test_round_trip(self, tmp_path, tetrahedron):
        path = tmp_path / "tetra.ply"
        write_mesh(tetrahedron, path)
        back = read_mesh(path)
        assert np.array_equal(back.faces, tetrahedron.faces)
        assert np.abs(back.vertices - tetrahedron.vertices).max() < 1e-6

    def test_vertex_normals_loaded(self, tmp_path):
        path = tmp_path / "fixture.ply"
        path.write_text(PLY_WITH_NORMALS)
        mesh, normals = read_mesh(path, return_normals=True)
        assert mesh.n_vertices == 4 and mesh.n_faces == 2
        assert normals is not None and normals.domain == "vertex"
        # The '0 0 2' row normalizes on load.
        assert np.allclose(normals.values[2], [0.0, 0.0, 1.0])
        assert np.allclose(normals.values[3], [1.0, 0.0, 0.0])

    def test_normals_round_trip(self, tmp_path, tetrahedron):
        field = NormalField(
            "vertex", np.tile([0.0, 0.0, 1.0], (tetrahedron.n_vertices, 1))
        )
        path = tmp_path / "with_normals.ply"
        write_mesh(tetrahedron, path, vertex_normals=field)
        _, back = read_mesh(path, return_normals=True)
        assert np.allclose(back.values, field.values)

    def test_binary_rejected(self, tmp_path):
        path = tmp_path / "bin.ply"
        path.write_text("ply\nformat binary_little_endian 1.0\nend_header\n")
        with pytest.raises(MeshIOError, match="ascii"):
            read_mesh(path)

    def test_non_triangle_rejected(self, tmp_path):
        path = tmp_path / "quad.ply"
        path.write_text(
            "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\n"
            "property float y\nproperty float z\nelement face 1\n"
            "property list uchar int vertex_indices\nend_header\n"
            "0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n"
        )
        with pytest.raises(MeshIOError, match="triangle"):
            read_mesh(path)

    def test_unsupported_extension(self, tmp_path, tetrahedron):
        with pytest.raises(MeshIOError):
            write_mesh(tetrahedron, tmp_path / "mesh.stl")


class TestNormalField:
    def test_constant_field(self, tmp_path):
        path = tmp_path / "n.txt"
        path.write_text("0 0 1\n" * 5)
        field = read_normal_field(path, 5)
        assert np.allclose(field.values, [0.0, 0.0, 1.0])

    def test_length_mismatch(self, tmp_path):
        path = tmp_path / "n.txt"
        path.write_text("0 0 1\n" * 4)
        with pytest.raises(MeshIOError, match="expected 5"):
            read_normal_field(path, 5)

    def test_normalized_on_load(self, tmp_path):
        path = tmp_path / "n.txt"
        path.write_text("0 0 2\n")
        field = read_normal_field(path, 1)
        assert np.allclose(field.values[0], [0.0, 0.0, 1.0])

    def test_near_zero_rejected(self, tmp_path):
        path = tmp_path / "n.txt"
        path.write_text("0 0 0\n")
        with pytest.raises(MeshIOError, match="near-zero"):
            read_normal_field(path, 1)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "n.txt"
        path.write_text("nan 0 1\n")
        with pytest.raises(MeshIOError, match="non-finite"):
            read_normal_field(path, 1)

    def test_write_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        values = rng.normal(size=(7, 3))
        values /= np.linalg.norm(values, axis=1)[:, None]
        field = NormalField("vertex", values)
        path = tmp_path / "field.txt"
        write_normal_field(field, path)
        back = read_normal_field(path, 7)
        assert np.abs(back.values - values).max() < 1e-8


class TestRecords:
    def test_report_and_config_round_trip(self, tmp_path):
        report_path = tmp_path / "report.txt"
        write_report({"mean_NE_deg": "1.25", "flipped_face_count": "0"}, report_path)
        text = report_path.read_text()
        assert "mean_NE_deg=1.25\n" in text
        config = read_config(report_path)
        assert config["mean_NE_deg"] == "1.25"

    def test_config_comments_and_dashes(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# tuned\nlambda-v = 3.5\neta=2  # inline\n")
        config = read_config(path)
        assert config == {"lambda_v": "3.5", "eta": "2"}

    def test_histogram_csv(self, tmp_path):
        path = tmp_path / "hist.csv"
        write_histogram_csv(np.array([0.0, 90.0, 180.0]), np.array([3, 4]), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "lower_edge_deg,count"
        assert lines[1] == "0,3"
        assert lines[2] == "90,4"
