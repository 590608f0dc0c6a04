import pytest

from perfmodel.models import AnalysisRun


@pytest.mark.django_db
class TestAnalysisRun:
    def make_run(self, **kwargs):
        values = dict(kind='solve', config_path='configs/table8.cfg', config_hash='f' * 64)
        values.update(kwargs)
        return AnalysisRun.objects.create(**values)

    def test_defaults(self):
        run = self.make_run()
        assert run.run_status == 'pending'
        assert run.exit_code is None
        assert run.duration is None
        assert str(run) == 'solve configs/table8.cfg (pending)'

    @pytest.mark.parametrize('exit_code,status', [(0, 'completed'), (2, 'not_converged'), (1, 'failed')])
    def test_complete_run(self, exit_code, status):
        run = self.make_run()
        run.start_run()
        run.complete_run(exit_code, {'micro_rejection': 0.1})
        run.refresh_from_db()
        assert run.run_status == status
        assert run.exit_code == exit_code
        assert run.summary == {'micro_rejection': 0.1}
        assert run.duration >= 0

    def test_fail_run(self):
        run = self.make_run(kind='validate')
        run.start_run()
        run.fail_run('boom')
        assert run.exit_code == 1
        assert run.summary == {'error': 'boom'}

    def test_forget_and_recall(self):
        run = self.make_run()
        run.forget()
        assert run.is_forgotten
        assert not AnalysisRun.objects.remembered().filter(id=run.id).exists()
        assert AnalysisRun.objects.forgotten().filter(id=run.id).exists()
        run.recall()
        assert AnalysisRun.objects.remembered().filter(id=run.id).exists()

    def test_queryset_filters(self):
        solve = self.make_run()
        self.make_run(kind='sweep', config_hash='0' * 64)
        assert list(AnalysisRun.objects.of_kind('solve')) == [solve]
        assert AnalysisRun.objects.of_kind(None).count() == 2
        assert list(AnalysisRun.objects.for_config('f' * 64)) == [solve]

    def test_newest_first(self):
        first = self.make_run()
        second = self.make_run()
        assert list(AnalysisRun.objects.all()) == [second, first]
