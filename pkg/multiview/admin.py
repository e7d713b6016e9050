from django.contrib import admin

from .models import ExperimentRun


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ("id", "command", "status", "seed", "output_dir", "created_at")
    list_filter = ("command", "status", "created_at")
    search_fields = ("id", "output_dir")
    readonly_fields = ("command", "status", "config", "summary", "output_dir", "created_at")

    def seed(self, obj):
        return (obj.config or {}).get("seed")
    seed.short_description = "Seed"
