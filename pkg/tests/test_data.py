"""Dataset schema, CSV ingestion, splits, and the Swissmetro recoding."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tastenet as tn
from tastenet import data as datamod

from conftest import toy_columns, toy_schema


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadCsv:
    def test_three_row_toy_file_field_by_field(self, tmp_path):
        p = tmp_path / "toy.csv"
        write_lines(p, [
            "age,member,bus_cost,car_cost,walk_cost,car_av,choice",
            "30,1,2.5,6.0,0,1,1",
            "41,0,3.0,5.5,0,0,0",   # car unavailable here
            "25,1,1.5,7.25,0,1,2",
        ])
        ds = tn.load_csv(p, toy_schema())
        assert len(ds) == 3
        np.testing.assert_array_equal(
            ds.avail, [[True, True, True], [True, False, True], [True, True, True]])
        np.testing.assert_array_equal(ds.chosen, [1, 0, 2])
        obs = ds.observation(1)
        assert obs.available.tolist() == [True, False, True]
        assert obs.x["bus"][0] == 3.0 and obs.x["car"][0] == 5.5
        np.testing.assert_array_equal(obs.z, [41.0, 0.0])

    def test_missing_column_names_it(self, tmp_path):
        p = tmp_path / "bad.csv"
        write_lines(p, ["age,member,bus_cost,walk_cost,car_av,choice", "30,1,2.5,0,1,0"])
        with pytest.raises(tn.SchemaError, match="car_cost"):
            tn.load_csv(p, toy_schema())

    def test_non_numeric_cell_reports_line(self, tmp_path):
        p = tmp_path / "bad.csv"
        write_lines(p, [
            "age,member,bus_cost,car_cost,walk_cost,car_av,choice",
            "30,1,2.5,6.0,0,1,0",
            "oops,1,2.5,6.0,0,1,0",
        ])
        with pytest.raises(tn.ParseError, match="line 3") as err:
            tn.load_csv(p, toy_schema())
        assert err.value.row == 3

    def test_zero_rows_is_data_error(self, tmp_path):
        p = tmp_path / "empty.csv"
        write_lines(p, ["age,member,bus_cost,car_cost,walk_cost,car_av,choice"])
        with pytest.raises(tn.DataError):
            tn.load_csv(p, toy_schema())

    def test_empty_file_is_data_error(self, tmp_path):
        p = tmp_path / "none.csv"
        p.write_text("")
        with pytest.raises(tn.DataError):
            tn.load_csv(p, toy_schema())

    def test_unknown_choice_value(self, tmp_path):
        p = tmp_path / "c.csv"
        write_lines(p, ["age,member,bus_cost,car_cost,walk_cost,car_av,choice",
                        "30,1,2.5,6.0,0,1,7"])
        with pytest.raises(tn.ParseError):
            tn.load_csv(p, toy_schema())


class TestInvariants:
    def test_chosen_must_be_available(self):
        cols = toy_columns()
        cols["car_av"][0] = 0.0
        cols["choice"][0] = 1.0  # car chosen but unavailable
        with pytest.raises(tn.DataError, match="unavailable"):
            tn.Dataset(toy_schema(), cols)

    def test_need_two_available(self):
        schema = tn.FeatureSchema(
            characteristics=("age",),
            alternatives=("bus", "car"),
            attributes={"bus": (("cost", "bus_cost"),), "car": (("cost", "car_cost"),)},
            availability={"bus": "bus_av", "car": "car_av"},
            choice_column="choice",
        )
        cols = {"age": np.array([30.0]), "bus_cost": np.array([2.0]),
                "car_cost": np.array([3.0]), "bus_av": np.array([1.0]),
                "car_av": np.array([0.0]), "choice": np.array([0.0])}
        with pytest.raises(tn.DataError, match="fewer than two"):
            tn.Dataset(schema, cols)

    def test_scaling_must_be_positive(self):
        with pytest.raises(tn.SchemaError):
            tn.FeatureSchema(
                characteristics=("age",),
                alternatives=("a", "b"),
                attributes={"a": (("x", "xa"),), "b": (("x", "xb"),)},
                choice_column="choice",
                scaling={"xa": 0.0},
            )


class TestOneHot:
    def schema(self):
        return tn.FeatureSchema(
            characteristics=("size", "color"),
            categorical={"color": tn.CategoricalRule(levels=(0, 1, 2), reference=0)},
            alternatives=("a", "b"),
            attributes={"a": (("x", "xa"),), "b": (("x", "xb"),)},
            choice_column="choice",
        )

    def test_reference_dropped_and_blocks_sum(self):
        cols = {"size": np.array([1.0, 2.0, 3.0]), "color": np.array([0.0, 1.0, 2.0]),
                "xa": np.zeros(3), "xb": np.zeros(3), "choice": np.zeros(3)}
        ds = tn.Dataset(self.schema(), cols)
        assert ds.schema.characteristic_names() == ("size", "color_1", "color_2")
        block = ds.z[:, 1:]
        np.testing.assert_array_equal(block.sum(axis=1), [0.0, 1.0, 1.0])
        np.testing.assert_array_equal(block, [[0, 0], [1, 0], [0, 1]])

    def test_undeclared_level_rejected(self):
        cols = {"size": np.ones(1), "color": np.array([5.0]),
                "xa": np.zeros(1), "xb": np.zeros(1), "choice": np.zeros(1)}
        with pytest.raises(tn.ParseError, match="color"):
            tn.Dataset(self.schema(), cols)


class TestRoundTrip:
    def test_write_reload_bit_for_bit(self, tmp_path, small_splits):
        ds = small_splits[2]
        p = tmp_path / "out.csv"
        tn.write_csv(ds, p)
        back = tn.load_csv(p, ds.schema, split_tag=ds.split_tag)
        for col in ds.schema.raw_columns():
            np.testing.assert_array_equal(ds.raw_column(col), back.raw_column(col))
        np.testing.assert_array_equal(ds.z, back.z)
        for alt in ds.schema.alternatives:
            np.testing.assert_array_equal(ds.x[alt], back.x[alt])
        np.testing.assert_array_equal(ds.chosen, back.chosen)

    def test_scaling_applied_on_load(self, tmp_path):
        schema = tn.FeatureSchema(
            characteristics=("age",),
            alternatives=("a", "b"),
            attributes={"a": (("x", "xa"),), "b": (("x", "xb"),)},
            choice_column="choice",
            scaling={"xa": 0.01, "xb": 0.01},
        )
        p = tmp_path / "s.csv"
        write_lines(p, ["age,xa,xb,choice", "30,120,240,0"])
        ds = tn.load_csv(p, schema)
        assert ds.x["a"][0, 0] == pytest.approx(1.2)
        assert ds.raw_column("xa")[0] == 120.0


class TestSplit:
    def test_published_sizes(self):
        assert datamod.split_sizes(10692, (0.70, 0.15, 0.15)) == [7484, 1604, 1604]

    def test_degenerate_split(self, small_splits):
        ds = small_splits[1]
        a, b, c = tn.split_dataset(ds, (1.0, 0.0, 0.0), seed=1)
        assert len(a) == len(ds) and len(b) == 0 and len(c) == 0

    def test_deterministic(self, small_splits):
        ds = small_splits[1]
        s1 = tn.split_dataset(ds, (0.6, 0.2, 0.2), seed=42)
        s2 = tn.split_dataset(ds, (0.6, 0.2, 0.2), seed=42)
        for a, b in zip(s1, s2):
            np.testing.assert_array_equal(a.chosen, b.chosen)
            np.testing.assert_array_equal(a.z, b.z)

    def test_partition_disjoint_exhaustive(self, small_splits):
        ds = small_splits[1]
        parts = tn.split_dataset(ds, (0.5, 0.25, 0.25), seed=3)
        key = ds.raw_column("inc")
        seen = np.concatenate([p.raw_column("inc") for p in parts])
        assert len(seen) == len(ds)
        np.testing.assert_array_equal(np.sort(seen), np.sort(key))

    def test_bad_fractions(self, small_splits):
        with pytest.raises(ValueError):
            tn.split_dataset(small_splits[1], (0.5, 0.2, 0.2), seed=0)

    @given(n=st.integers(3, 5000),
           raw=st.tuples(st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.01, 1)))
    @settings(max_examples=60, deadline=None)
    def test_sizes_within_one_row(self, n, raw):
        total = sum(raw)
        fractions = tuple(f / total for f in raw)
        sizes = datamod.split_sizes(n, fractions)
        assert sum(sizes) == n
        for s, f in zip(sizes, fractions):
            assert abs(s - n * f) <= 1.0


SWISS_HEADER = ("GROUP\tSURVEY\tSP\tID\tPURPOSE\tFIRST\tTICKET\tWHO\tLUGGAGE\tAGE\t"
                "MALE\tINCOME\tGA\tORIGIN\tDEST\tTRAIN_AV\tCAR_AV\tSM_AV\t"
                "TRAIN_TT\tTRAIN_CO\tTRAIN_HE\tSM_TT\tSM_CO\tSM_HE\tSM_SEATS\t"
                "CAR_TT\tCAR_CO\tCHOICE")


def swiss_row(purpose=1, first=0, who=1, luggage=0, age=3, male=1, income=2, ga=0,
              train_av=1, car_av=1, sm_av=1, choice=2):
    vals = {"GROUP": 2, "SURVEY": 0, "SP": 1, "ID": 1, "PURPOSE": purpose,
            "FIRST": first, "TICKET": 1, "WHO": who, "LUGGAGE": luggage, "AGE": age,
            "MALE": male, "INCOME": income, "GA": ga, "ORIGIN": 2, "DEST": 1,
            "TRAIN_AV": train_av, "CAR_AV": car_av, "SM_AV": sm_av,
            "TRAIN_TT": 112, "TRAIN_CO": 48, "TRAIN_HE": 120, "SM_TT": 63,
            "SM_CO": 52, "SM_HE": 20, "SM_SEATS": 0, "CAR_TT": 117, "CAR_CO": 65,
            "CHOICE": choice}
    return "\t".join(str(vals[c]) for c in SWISS_HEADER.split("\t"))


class TestSwissmetro:
    def test_filters_and_recodes(self, tmp_path):
        p = tmp_path / "swiss.dat"
        write_lines(p, [
            SWISS_HEADER,
            swiss_row(age=6),                     # unknown age: dropped
            swiss_row(purpose=9),                 # "other" purpose: dropped
            swiss_row(choice=0),                  # unknown choice: dropped
            swiss_row(purpose=7, who=0, luggage=3, income=4, age=1, choice=3),
            swiss_row(purpose=2, who=3, luggage=1, income=1, age=5, choice=1),
        ])
        ds = tn.load_swissmetro(p)
        assert len(ds) == 2
        # row 0: purpose 7 -> business(2); who 0 -> self(0); luggage 3 -> 2;
        # income 4 -> unknown(3); age 1 -> 0; choice 3 -> car(2)
        assert ds.raw_column("PURPOSE")[0] == 2
        assert ds.raw_column("WHO")[0] == 0
        assert ds.raw_column("LUGGAGE")[0] == 2
        assert ds.raw_column("INCOME")[0] == 3
        assert ds.raw_column("AGE")[0] == 0
        assert ds.chosen[0] == 2
        # row 1: purpose 2 -> shopping(1); who 3 -> half-half(2); age 5 -> 4
        assert ds.raw_column("PURPOSE")[1] == 1
        assert ds.raw_column("WHO")[1] == 2
        assert ds.raw_column("AGE")[1] == 4
        assert ds.chosen[1] == 0
        # scaling: travel time divided by 100
        assert ds.x["train"][0, 0] == pytest.approx(1.12)

    def test_all_filtered_is_data_error(self, tmp_path):
        p = tmp_path / "swiss.dat"
        write_lines(p, [SWISS_HEADER, swiss_row(age=6), swiss_row(choice=0)])
        with pytest.raises(tn.DataError):
            tn.load_swissmetro(p)

    def test_one_hot_layout(self, tmp_path):
        p = tmp_path / "swiss.dat"
        write_lines(p, [SWISS_HEADER, swiss_row(), swiss_row(income=3, choice=3)])
        ds = tn.load_swissmetro(p)
        names = ds.schema.characteristic_names()
        assert names[0] == "MALE" and "AGE_4" in names and "INCOME_3" in names
        assert len(names) == 1 + 4 + 3 + 1 + 2 + 3 + 2 + 1
