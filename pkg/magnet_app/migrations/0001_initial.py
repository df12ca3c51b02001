from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='EvaluationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('eval_stem', 'StEM evaluation'), ('eval_mtgs', 'MTGS evaluation'), ('eval_retrieval', 'Retrieval evaluation'), ('eval_text', 'Text alignment evaluation'), ('select_frames', 'Salient frame selection'), ('retrieve', 'Retrieval'), ('pipeline_run', 'Grounded QA pipeline'), ('validate', 'Schema validation')], max_length=50)),
                ('parameters', models.JSONField(default=dict)),
                ('summary', models.JSONField(default=dict)),
                ('report_sha256', models.CharField(max_length=64)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
